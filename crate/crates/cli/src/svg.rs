//! Minimal SVG output. Coordinates are printed with three decimals so that
//! equal inputs give byte-identical files.

use std::fmt::Write as _;

use splitree::chrono_tree::ChronologicalTree;
use splitree::contour::{explore, ContourError};

const W: f64 = 960.0;
const H: f64 = 420.0;
const MARGIN: f64 = 30.0;
const PANEL: f64 = (W - 3.0 * MARGIN) / 2.0;

fn open(doc: &mut String, header: &str) {
    let _ = writeln!(doc, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(doc, "<!-- schema=1 {} -->", header.replace("--", "- -"));
    let _ = writeln!(
        doc,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        doc,
        "<style>.life{{stroke:#222;stroke-width:1.5}} .birth{{stroke:#888;stroke-dasharray:3 2}} \
         .slope{{stroke:#1f5fa8}} .jump{{stroke:#c0392b}} .bar{{fill:#9db8d9;stroke:#4a6f99}} \
         .analytic{{fill:none;stroke:#c0392b;stroke-width:1.5}} .axis{{stroke:#000}} \
         text{{font:11px sans-serif}}</style>"
    );
}

fn line(doc: &mut String, class: &str, x1: f64, y1: f64, x2: f64, y2: f64) {
    let _ = writeln!(
        doc,
        r#"<line class="{class}" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
    );
}

/// The tree (left, one vertical line per individual in exploration order)
/// and its contour (right). Jumps of the contour have class `jump`.
pub fn tree_and_contour(tree: &ChronologicalTree, header: &str) -> Result<String, ContourError> {
    let ex = explore(tree)?;
    let path = ex.path();
    let n = tree.len();
    let top = tree.height().max(f64::MIN_POSITIVE);
    let y = |level: f64| MARGIN + (top - level) / top * (H - 2.0 * MARGIN);

    let mut doc = String::new();
    open(&mut doc, header);
    let _ = writeln!(doc, r#"<text x="{MARGIN}" y="18">tree ({n} individuals)</text>"#);
    let _ = writeln!(doc, r#"<text x="{:.3}" y="18">contour</text>"#, 2.0 * MARGIN + PANEL);

    let mut rank = vec![0usize; n];
    for j in 0..path.jumps().len() {
        rank[ex.jump_node(j).0] = j + 1;
    }
    let x_tree = |id: usize| MARGIN + (rank[id] as f64 + 0.5) / n as f64 * PANEL;
    let _ = writeln!(doc, r#"<g id="tree">"#);
    for id in tree.ids() {
        if let Some(parent) = tree.parent(id) {
            let a = tree.alpha(id);
            line(&mut doc, "birth", x_tree(parent.0), y(a), x_tree(id.0), y(a));
        }
        line(&mut doc, "life", x_tree(id.0), y(tree.alpha(id)), x_tree(id.0), y(tree.omega(id)));
    }
    let _ = writeln!(doc, "</g>");

    let kill = path.kill_time().max(f64::MIN_POSITIVE);
    let x0 = 2.0 * MARGIN + PANEL;
    let x_path = |t: f64| x0 + t / kill * PANEL;
    let _ = writeln!(doc, r#"<g id="contour">"#);
    line(&mut doc, "axis", x0, y(0.0), x0 + PANEL, y(0.0));
    for (t0, t1, level) in path.segments() {
        line(&mut doc, "slope", x_path(t0), y(level), x_path(t1), y(level - (t1 - t0)));
    }
    for (j, jump) in path.jumps().iter().enumerate() {
        let x = x_path(jump.time);
        line(&mut doc, "jump", x, y(path.level_before(j)), x, y(path.level_after(j)));
    }
    let _ = writeln!(doc, "</g>\n</svg>");
    Ok(doc)
}

/// Histogram of `depths` on `(0, tau)` as a density, with the density of
/// `cdf` averaged over each bin drawn on top.
pub fn depth_histogram<F: Fn(f64) -> f64>(depths: &[f64], tau: f64, bins: usize, cdf: F, header: &str) -> String {
    let width = tau / bins as f64;
    let mut counts = vec![0usize; bins];
    for &d in depths {
        let k = ((d / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = depths.len() as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n / width).collect();
    let analytic: Vec<f64> = (0..bins)
        .map(|k| (cdf((k + 1) as f64 * width) - cdf(k as f64 * width)) / width)
        .collect();
    let peak = empirical
        .iter()
        .chain(&analytic)
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::MIN_POSITIVE, f64::max);
    let plot_w = W - 2.0 * MARGIN;
    let x = |s: f64| MARGIN + s / tau * plot_w;
    let y = |v: f64| H - MARGIN - v / peak * (H - 2.0 * MARGIN);

    let mut doc = String::new();
    open(&mut doc, header);
    let _ = writeln!(
        doc,
        r#"<text x="{MARGIN}" y="18">coalescence depths below tau={tau} ({} depths)</text>"#,
        depths.len()
    );
    line(&mut doc, "axis", MARGIN, H - MARGIN, W - MARGIN, H - MARGIN);
    for (k, v) in empirical.iter().enumerate() {
        let _ = writeln!(
            doc,
            r#"<rect class="bar" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
            x(k as f64 * width),
            y(*v),
            x(width) - MARGIN,
            H - MARGIN - y(*v)
        );
    }
    let mut points = String::new();
    for (k, v) in analytic.iter().enumerate() {
        if v.is_finite() {
            let _ = write!(points, "{:.3},{:.3} ", x((k as f64 + 0.5) * width), y(*v));
        }
    }
    let _ = writeln!(doc, r#"<polyline class="analytic" points="{}"/>"#, points.trim_end());
    let _ = writeln!(doc, "</svg>");
    doc
}
