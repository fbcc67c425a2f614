//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Seeds are fixed; a failure on these seeds is a bug.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use splitree::analysis::{
    coalescent_profile, correlation, depth_cdf, descendance_split,
    extinction_prob, gof_geometric, gof_ks, gof_ks_two_sample, marginal, mean_se, GofReport,
};
use splitree::chrono_tree::ChronologicalTree;
use splitree::contour::{decode, jccp, literal_height, ContourPath, HeightProfile};
use splitree::levy_kernel::{
    LifespanLaw, LifespanSpec, PsiModel, ScaleFunction,
};
use splitree::simulate::{
    extinct_by, sample_extinct, sample_levy_reflected, sample_overshoot, sample_tree,
    sample_tree_detailed, RngStream, DEFAULT_VERTEX_BUDGET,
};

const BARRIER_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
    /// Recorded but not asserted.
    informational: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            informational: false,
        }
    }
}

fn exp_spec(b: f64, d: f64) -> LifespanSpec {
    LifespanSpec::exponential(b, d).expect("valid spec")
}

fn trees(spec: &LifespanSpec, chi: f64, cap: f64, seed: u64, n: u64) -> Vec<ChronologicalTree> {
    (0..n)
        .into_par_iter()
        .map(|i| sample_tree(spec, chi, cap, &mut RngStream::new(seed, i).rng()).expect("tree"))
        .collect()
}

fn p_fmt(r: &GofReport) -> String {
    format!("{} p={:.4}", r.test, r.p_value)
}

// 1. exact contour identities
fn contour_identities() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let sample = trees(&spec, 1.0, 5.0, 101, 1000);
    let mut failures = Vec::new();
    let mut max_len_gap: f64 = 0.0;
    let mut max_level_gap: f64 = 0.0;
    for (i, t) in sample.iter().enumerate() {
        let path = jccp(t).expect("finite tree");
        let gap = (path.kill_time() - t.total_length()).abs();
        max_len_gap = max_len_gap.max(gap);
        if gap > 1e-9 {
            failures.push(format!("tree {i}: kill time gap {gap:e}"));
        }
        let mut sizes: Vec<f64> = std::iter::once(path.start_level())
            .chain(path.jumps().iter().map(|j| j.size))
            .collect();
        let mut lifespans: Vec<f64> = t.ids().map(|id| t.lifespan_of(id)).collect();
        sizes.sort_by(f64::total_cmp);
        lifespans.sort_by(f64::total_cmp);
        if sizes != lifespans {
            failures.push(format!("tree {i}: jump sizes differ from lifespans"));
        }
        let back = decode(&path).expect("decodable");
        let (a, b) = (back.canonical().vertices(), t.canonical().vertices());
        let same_shape = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0);
        if !same_shape {
            failures.push(format!("tree {i}: decode(jccp) changes the genealogy"));
        } else {
            for (x, y) in a.iter().zip(&b) {
                max_level_gap = max_level_gap.max((x.1 - y.1).abs()).max((x.2 - y.2).abs());
            }
        }
        let again = jccp(&back).expect("finite tree");
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        path.write_csv(&mut c1, "").unwrap();
        again.write_csv(&mut c2, "").unwrap();
        if again != path || c1 != c2 {
            failures.push(format!("tree {i}: jccp(decode(P)) != P"));
        }
    }
    if max_level_gap > 1e-9 {
        failures.push(format!("decode(jccp) level gap {max_level_gap:e}"));
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "1000 trees; max |kill-length| {max_len_gap:.1e}, max decode level gap {max_level_gap:.1e}, {} violations{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// 2. local times of the height process equal generation lengths
fn le_gall_le_jan() -> Outcome {
    let spec = exp_spec(0.8, 1.0);
    let sample = trees(&spec, 1.0, 1e6, 202, 1000);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for t in &sample {
        let l = HeightProfile::new(&jccp(t).unwrap()).local_times();
        let z = t.generation_lengths();
        if l.len() != z.len() {
            bad += 1;
            continue;
        }
        for (a, b) in l.iter().zip(&z) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(
        bad == 0 && worst <= 1e-9,
        format!("1000 subcritical trees; max |L_n - Z_n| = {worst:.1e}; generation-count mismatches {bad}"),
    )
}

// 3. scale function solver against closed forms
fn scale_solver() -> Outcome {
    let cases = [
        ("Yule b=1", LifespanSpec::yule(1.0).unwrap()),
        ("Exponential(1.2,1)", exp_spec(1.2, 1.0)),
        ("Exponential(1,1)", exp_spec(1.0, 1.0)),
    ];
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, spec) in cases {
        let model = PsiModel::new(spec);
        let table = model.scale_table(10.0, 1e-3).unwrap();
        let exact = model.closed_form_scale().unwrap();
        let err = table
            .grid()
            .map(|(x, w)| (w - exact.w(x)).abs())
            .fold(0.0, f64::max);
        pass &= err <= 1e-6;
        parts.push(format!("{name} {err:.1e}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    Outcome::new(pass, format!("sup errors: {} ({:.2}s)", parts.join(", "), elapsed.as_secs_f64()))
}

// 4. marginal law of the width
fn marginal_law() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let w = PsiModel::new(spec.clone()).closed_form_scale().unwrap();
    let (chi, tau) = (1.0, 3.0);
    let n = 100_000u64;
    let widths: Vec<u64> = (0..n)
        .into_par_iter()
        .map(|i| {
            sample_tree(&spec, chi, tau, &mut RngStream::new(404, i).rng())
                .unwrap()
                .width(tau) as u64
        })
        .collect();
    let m = marginal(&w, chi, tau).unwrap();
    let zeros = widths.iter().filter(|&&x| x == 0).count() as f64;
    let p_hat = zeros / n as f64;
    let se = (m.p_zero * (1.0 - m.p_zero) / n as f64).sqrt();
    let positive: Vec<u64> = widths.iter().copied().filter(|&x| x > 0).collect();
    let gof = gof_geometric(&positive, m.success).unwrap().with_seed(404);
    let mean = positive.iter().sum::<u64>() as f64 / positive.len() as f64;
    let rel = (mean - m.mean_conditional).abs() / m.mean_conditional;
    let zero_ok = (p_hat - m.p_zero).abs() <= 3.0 * se;
    Outcome::new(
        zero_ok && gof.pass && rel <= 0.02,
        format!(
            "P(Xi=0) {p_hat:.4} vs W(2)/W(3) {:.4} ({:.2} SE); {}; mean {mean:.4} vs W(3) {:.4} ({:.2}%)",
            m.p_zero,
            (p_hat - m.p_zero).abs() / se,
            p_fmt(&gof),
            m.mean_conditional,
            100.0 * rel
        ),
    )
}

struct PathStats {
    kill: f64,
    visits: f64,
    excursion_min: Option<f64>,
}

fn path_stats(p: &ContourPath, tau: f64) -> PathStats {
    PathStats {
        kill: p.kill_time(),
        visits: p.barrier_visits(tau, BARRIER_TOL) as f64,
        excursion_min: p.first_excursion_min(tau, BARRIER_TOL),
    }
}

// 5. tree contours and the reflected Lévy process agree in law
fn levy_equivalence() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let (chi, tau) = (1.0, 3.0);
    let n = 100_000u64;
    let from_trees: Vec<PathStats> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = sample_tree(&spec, chi, tau, &mut RngStream::new(505, i).rng()).unwrap();
            path_stats(&jccp(&t).unwrap(), tau)
        })
        .collect();
    let direct: Vec<PathStats> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = sample_levy_reflected(&spec, chi, tau, &mut RngStream::new(506, i).rng()).unwrap();
            path_stats(&p, tau)
        })
        .collect();
    let kill = gof_ks_two_sample(
        &from_trees.iter().map(|s| s.kill).collect::<Vec<_>>(),
        &direct.iter().map(|s| s.kill).collect::<Vec<_>>(),
    )
    .unwrap();
    let visits = gof_ks_two_sample(
        &from_trees.iter().map(|s| s.visits).collect::<Vec<_>>(),
        &direct.iter().map(|s| s.visits).collect::<Vec<_>>(),
    )
    .unwrap();
    let mins = gof_ks_two_sample(
        &from_trees.iter().filter_map(|s| s.excursion_min).collect::<Vec<_>>(),
        &direct.iter().filter_map(|s| s.excursion_min).collect::<Vec<_>>(),
    )
    .unwrap();
    Outcome::new(
        kill.pass && visits.pass && mins.pass,
        format!(
            "kill time p={:.4}, tau-visits p={:.4}, first-excursion min p={:.4} (n={} paths each)",
            kill.p_value, visits.p_value, mins.p_value, n
        ),
    )
}

fn profiles(spec: &LifespanSpec, chi: f64, tau: f64, seed: u64, want: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(want);
    let mut next = 0u64;
    const BATCH: u64 = 20_000;
    while out.len() < want {
        let batch: Vec<Option<Vec<f64>>> = (next..next + BATCH)
            .into_par_iter()
            .map(|i| {
                let t = sample_tree(spec, chi, tau, &mut RngStream::new(seed, i).rng()).unwrap();
                (t.width(tau) > 0).then(|| coalescent_profile(&t, tau).unwrap().depths)
            })
            .collect();
        out.extend(batch.into_iter().flatten());
        next += BATCH;
    }
    out.truncate(want);
    out
}

// 6. coalescent point process
fn cpp_law() -> Outcome {
    let tau = 3.0;
    let n = 100_000;
    let spec = exp_spec(1.2, 1.0);
    let w = PsiModel::new(spec.clone()).closed_form_scale().unwrap();
    let sample = profiles(&spec, 1.0, tau, 606, n);
    let depths: Vec<f64> = sample.iter().flat_map(|d| d[..d.len() - 1].iter().copied()).collect();
    let ks = gof_ks(&depths, |s| depth_cdf(&w, tau, s.clamp(0.0, tau)).unwrap()).unwrap();
    let pairs: Vec<(f64, f64)> = sample
        .iter()
        .filter(|d| d.len() >= 3)
        .map(|d| (d[0], d[1]))
        .collect();
    let rho = correlation(&pairs);
    let rho_bound = 3.0 / (pairs.len() as f64).sqrt();

    // critical case against the explicit coalescence-time density
    let b = 1.0;
    let crit = profiles(&exp_spec(b, b), 1.0, tau, 607, n);
    let times: Vec<f64> = crit
        .iter()
        .flat_map(|d| d[..d.len() - 1].iter().map(|a| tau - a))
        .collect();
    let ks_crit = gof_ks(&times, |s| {
        let s = s.clamp(0.0, tau);
        s * (1.0 + b * tau) / (tau * (1.0 + b * s))
    })
    .unwrap();
    Outcome::new(
        ks.pass && rho.abs() <= rho_bound && ks_crit.pass,
        format!(
            "{} depths: KS p={:.4}; corr(a1,a2)={rho:.4} (bound {rho_bound:.4}, {} pairs); critical KS p={:.4} ({} times)",
            depths.len(),
            ks.p_value,
            pairs.len(),
            ks_crit.p_value,
            times.len()
        ),
    )
}

// 7. extinction probability
fn extinction() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let model = PsiModel::new(spec.clone());
    let (chi, cap) = (1.0, 150.0);
    let n = 100_000u64;
    let start = Instant::now();
    let extinct = (0..n)
        .into_par_iter()
        .filter(|&i| extinct_by(&spec, chi, cap, &mut RngStream::new(707, i).rng()).unwrap())
        .count();
    let elapsed = start.elapsed();
    let freq = extinct as f64 / n as f64;
    let p = extinction_prob(&model, chi).unwrap();
    // P(extinct after the cap) = P(Ext) - P(Xi_cap = 0), exact from W
    let w = model.closed_form_scale().unwrap();
    let bias = p - w.w(cap - chi) / w.w(cap);
    Outcome::new(
        (freq - p).abs() <= 0.005 && elapsed < Duration::from_secs(300),
        format!(
            "extinct-by-cap {freq:.5} vs e^(-0.2) {p:.5} (|diff| {:.5}); cap bias {bias:.1e}; {:.1}s",
            (freq - p).abs(),
            elapsed.as_secs_f64()
        ),
    )
}

// 8. conditioning on extinction
fn conditioning() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let model = PsiModel::new(spec.clone());
    let cond = model.conditioned_spec().unwrap();
    let params_ok = match cond.law() {
        LifespanLaw::Exponential { d } => (cond.b() - 1.0).abs() <= 1e-12 && (d - 1.2).abs() <= 1e-12,
        _ => false,
    };
    let (chi, cap, mid) = (1.0, 40.0, 1.5);
    let n = 20_000usize;
    let mut rejected: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut next = 0u64;
    while rejected.len() < n {
        let batch: Vec<Option<(f64, f64)>> = (next..next + 5000)
            .into_par_iter()
            .map(|i| {
                sample_extinct(&spec, chi, cap, &mut RngStream::new(808, i).rng())
                    .unwrap()
                    .map(|s| (s.tree.total_length(), s.tree.width(mid) as f64))
            })
            .collect();
        rejected.extend(batch.into_iter().flatten());
        next += 5000;
    }
    rejected.truncate(n);
    let direct: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_tree(&cond, chi, cap, &mut RngStream::new(809, i).rng()).unwrap();
            (t.total_length(), t.width(mid) as f64)
        })
        .collect();
    let kill = gof_ks_two_sample(
        &rejected.iter().map(|x| x.0).collect::<Vec<_>>(),
        &direct.iter().map(|x| x.0).collect::<Vec<_>>(),
    )
    .unwrap();
    let width = gof_ks_two_sample(
        &rejected.iter().map(|x| x.1).collect::<Vec<_>>(),
        &direct.iter().map(|x| x.1).collect::<Vec<_>>(),
    )
    .unwrap();
    Outcome::new(
        params_ok && kill.pass && width.pass,
        format!(
            "conditioned measure = Exponential(b={:.12}, {:?}); kill time p={:.4}; width at {mid} p={:.4} ({} rejection draws)",
            cond.b(),
            cond.law(),
            kill.p_value,
            width.p_value,
            next
        ),
    )
}

// 9. limit laws
fn limit_laws() -> Outcome {
    // (i) Yaglom: conditional width at tau = 30 against geometric(1 - m);
    // the conditional law does not depend on chi, so chi = tau.
    let sub = exp_spec(0.8, 1.0);
    let tau = 30.0;
    let widths: Vec<u64> = (0..20_000u64)
        .into_par_iter()
        .map(|i| sample_tree(&sub, tau, tau, &mut RngStream::new(909, i).rng()).unwrap().width(tau) as u64)
        .collect();
    let yaglom = gof_geometric(&widths, 1.0 - sub.m()).unwrap();

    // (iii) supercritical
    let spec = exp_spec(1.2, 1.0);
    let model = PsiModel::new(spec.clone());
    let eta = model.eta();
    let p = model.psi_prime(eta).unwrap();
    let tau = 25.0;
    let scaled: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_tree(&spec, tau, tau, &mut RngStream::new(910, i).rng()).unwrap();
            (-eta * tau).exp() * t.width(tau) as f64
        })
        .collect();
    let (mean, _) = mean_se(&scaled);
    let mean_rel = (mean - 1.0 / p).abs() * p;

    let horizon_margin = 40.0;
    let ratios: Vec<f64> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(911, i).rng();
            let s = sample_tree_detailed(&spec, tau, tau, DEFAULT_VERTEX_BUDGET, &mut rng).unwrap();
            let w = descendance_split(&model, &s, tau, tau + horizon_margin, &mut rng).unwrap();
            w.xi_inf as f64 / w.xi as f64
        })
        .collect();
    let (split, split_se) = mean_se(&ratios);

    let overshoot: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .filter_map(|i| {
            sample_overshoot(&spec, 200.0, &mut RngStream::new(912, i).rng())
                .unwrap()
                .map(|o| 1.0 - (-eta * o.overshoot).exp())
        })
        .collect();
    let (ov, ov_se) = mean_se(&overshoot);

    let pass = yaglom.pass
        && mean_rel <= 0.05
        && (split - p).abs() <= 3.0 * split_se
        && (ov - p).abs() <= 3.0 * ov_se;
    Outcome::new(
        pass,
        format!(
            "(i) {}; (iii) mean e^(-eta tau)Xi {mean:.4} vs 1/psi'(eta) {:.4} ({:.2}%); split {split:.4}±{split_se:.4} vs p {p:.4}; overshoot functional {ov:.4}±{ov_se:.4}",
            p_fmt(&yaglom),
            1.0 / p,
            100.0 * mean_rel
        ),
    )
}

// 9 (ii), recorded only
fn critical_limit() -> Outcome {
    let b = 1.0;
    let spec = exp_spec(b, b);
    let model = PsiModel::new(spec.clone());
    let rate = model.psi_second(0.0).unwrap() / 2.0;
    let tau = 50.0;
    let scaled: Vec<f64> = (0..5_000u64)
        .into_par_iter()
        .map(|i| sample_tree(&spec, tau, tau, &mut RngStream::new(913, i).rng()).unwrap().width(tau) as f64 / tau)
        .collect();
    let (mean, se) = mean_se(&scaled);
    let ks = gof_ks(&scaled, |x| 1.0 - (-rate * x.max(0.0)).exp()).unwrap();
    Outcome {
        pass: true,
        informational: true,
        detail: format!(
            "critical tau=50: mean Xi/tau {mean:.4}±{se:.4} vs limit {:.4} (gap {:.4}); KS vs Exp({rate}) p={:.4}",
            1.0 / rate,
            mean - 1.0 / rate,
            ks.p_value
        ),
    }
}

// 10. stack-based height process against its definition
fn height_oracle() -> Outcome {
    let spec = exp_spec(1.2, 1.0);
    let mut checked = 0;
    let mut mismatches = 0;
    let mut points = 0usize;
    let mut i = 0u64;
    while checked < 500 {
        let path = sample_levy_reflected(&spec, 2.0, 6.0, &mut RngStream::new(1010, i).rng()).unwrap();
        i += 1;
        if path.jumps().len() > 200 || path.jumps().is_empty() {
            continue;
        }
        checked += 1;
        let h = HeightProfile::new(&path);
        let mut times: Vec<f64> = path.jumps().iter().map(|j| j.time).collect();
        times.extend(h.breaks().iter().map(|b| b.0));
        let breaks: Vec<f64> = h.breaks().iter().map(|b| b.0).chain([path.kill_time()]).collect();
        times.extend(breaks.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        times.extend(breaks.iter().skip(1).map(|t| t.next_down()));
        for t in times {
            if t < 0.0 || t >= path.kill_time() {
                continue;
            }
            points += 1;
            if h.at(t) != literal_height(&path, t) {
                mismatches += 1;
            }
        }
    }
    Outcome::new(
        mismatches == 0,
        format!("{checked} paths (<= 200 jumps), {points} evaluation times, {mismatches} mismatches"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 contour identities", contour_identities),
        ("2 local times = generation lengths", le_gall_le_jan),
        ("3 scale function solver", scale_solver),
        ("4 width marginal law", marginal_law),
        ("5 reflected Levy equivalence", levy_equivalence),
        ("6 coalescent point process", cpp_law),
        ("7 extinction probability", extinction),
        ("8 conditioning on extinction", conditioning),
        ("9 limit laws", limit_laws),
        ("9 (ii) critical limit", critical_limit),
        ("10 height process oracle", height_oracle),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let out = run();
        let verdict = match (out.informational, out.pass) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        if !out.pass {
            failed += 1;
        }
        println!(
            "acceptance criterion {name}: {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
