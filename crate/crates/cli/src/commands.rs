//! `simulate`, `scale`, `cpp`, `marginal` and `plot`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use splitree::analysis::{
    coalescent_profile, depth_cdf, gof_binomial, gof_geometric, gof_ks, holm_adjust, marginal, GofReport,
    ALPHA,
};
use splitree::chrono_tree::{read_jsonl, write_jsonl, ChronologicalTree};
use splitree::contour::jccp;
use splitree::levy_kernel::{LifespanSpec, MeasureConfig, PsiModel, ScaleFunction};
use splitree::simulate::{sample_tree, RngStream};

use crate::config::Run;
use crate::error::CliError;
use crate::svg;

/// Replicates computed in parallel before being written in order.
const CHUNK: u64 = 1000;

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `f(i)` for `i` in `range`, on the run's worker pool, in index order.
pub fn par_map<T, F>(pool: &rayon::ThreadPool, range: std::ops::Range<u64>, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(u64) -> Result<T, CliError> + Sync + Send,
{
    pool.install(|| range.into_par_iter().map(f).collect())
}

pub fn tree(spec: &LifespanSpec, chi: f64, cap: f64, seed: u64, stream: u64) -> Result<ChronologicalTree, CliError> {
    sample_tree(spec, chi, cap, &mut RngStream::new(seed, stream).rng()).map_err(CliError::from_lib)
}

/// The measure used for analytic reference laws: the simulated one unless
/// `verify.reference_b` overrides its birth rate.
pub fn reference_spec(run: &Run) -> Result<LifespanSpec, CliError> {
    match run.config.verify.reference_b {
        None => Ok(run.spec.clone()),
        Some(b) => MeasureConfig {
            b,
            law: run.config.measure.law.clone(),
        }
        .build()
        .map_err(|e| CliError::Config(format!("invalid reference measure: {e}"))),
    }
}

/// `W` for `spec` on `[0, x_max]`: closed form when there is one, otherwise
/// a table at the configured step.
pub fn scale_function(run: &Run, spec: &LifespanSpec, x_max: f64) -> Result<Box<dyn ScaleFunction + Send + Sync>, CliError> {
    let model = PsiModel::new(spec.clone());
    if let Some(c) = model.closed_form_scale() {
        return Ok(Box::new(c));
    }
    let h = run.config.scale.h.min(x_max / 10.0);
    Ok(Box::new(model.scale_table(x_max, h).map_err(CliError::from_lib)?))
}

#[derive(Serialize)]
struct ReportLine<'a> {
    #[serde(flatten)]
    report: &'a GofReport,
    /// Holm-adjusted over all reports of the run; `pass` is decided on it.
    p_holm: f64,
}

/// Writes the reports (stdout and `path`) with the family-wise verdict, and
/// fails if any test is rejected.
pub fn conclude(path: &Path, header: &str, mut reports: Vec<GofReport>) -> Result<(), CliError> {
    let adjusted = holm_adjust(&reports.iter().map(|r| r.p_value).collect::<Vec<_>>());
    let mut out = create(path)?;
    writeln!(out, "# schema=1 {header} alpha={ALPHA} correction=holm")?;
    for (r, &p_holm) in reports.iter_mut().zip(&adjusted) {
        r.pass = p_holm > ALPHA;
        let line = serde_json::to_string(&ReportLine { report: r, p_holm }).expect("report serializes");
        println!("{line}");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.test.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Statistical(format!("{} failed: {}", failed.len(), failed.join(", "))))
    }
}

pub fn simulate(run: &Run) -> Result<(), CliError> {
    let seed = run.require_seed()?;
    let pool = run.pool()?;
    let header = run.header("simulate");
    let n = run.replicates();
    let mut summary = create(&run.out.join("summary.csv"))?;
    writeln!(summary, "# schema=1 {header}")?;
    writeln!(summary, "replicate,vertices,total_length,width_tau,extinct_by_cap")?;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch = par_map(&pool, start..end, |i| {
            let t = tree(&run.spec, run.chi, run.cap, seed, i)?;
            let p = jccp(&t).map_err(CliError::from_lib)?;
            Ok((t, p))
        })?;
        for (k, (t, p)) in batch.iter().enumerate() {
            let i = start + k as u64;
            let mut f = create(&run.out.join("trees").join(format!("tree_{i:06}.jsonl")))?;
            write_jsonl(t, Some(&format!("{header} replicate={i}")), &mut f)?;
            f.flush()?;
            let mut f = create(&run.out.join("contours").join(format!("contour_{i:06}.csv")))?;
            p.write_csv(&mut f, &format!("{header} replicate={i}"))?;
            f.flush()?;
            writeln!(
                summary,
                "{i},{},{:.16e},{},{}",
                t.len(),
                t.total_length(),
                t.width(run.tau),
                t.width(run.cap) == 0
            )?;
        }
        start = end;
    }
    summary.flush()?;
    eprintln!("simulate: {n} replicates written to {}", run.out.display());
    Ok(())
}

pub fn scale(run: &Run) -> Result<(), CliError> {
    let opts = &run.config.scale;
    let model = PsiModel::new(run.spec.clone());
    let table = model.scale_table(opts.x_max, opts.h).map_err(CliError::from_lib)?;
    let closed = model.closed_form_scale();
    let mut out = create(&run.out.join("scale.csv"))?;
    let dev = table.write_csv(
        &mut out,
        &run.header("scale"),
        closed.as_ref().map(|c| c as &dyn ScaleFunction),
    )?;
    out.flush()?;
    match dev {
        Some(d) => println!("max_abs_deviation={d:.3e}"),
        None => println!("no closed form for this measure"),
    }
    Ok(())
}

/// Coalescent depths of every replicate with somebody alive at `tau`.
pub fn profiles(run: &Run, seed: u64, stream_base: u64) -> Result<Vec<(u64, Vec<f64>)>, CliError> {
    let pool = run.pool()?;
    let all = par_map(&pool, 0..run.replicates(), |i| {
        let t = tree(&run.spec, run.chi, run.tau, seed, stream_base + i)?;
        if t.width(run.tau) == 0 {
            return Ok(None);
        }
        let prof = coalescent_profile(&t, run.tau).map_err(CliError::from_lib)?;
        Ok(Some((i, prof.depths)))
    })?;
    Ok(all.into_iter().flatten().collect())
}

pub fn cpp_reports(run: &Run, profiles: &[(u64, Vec<f64>)]) -> Result<Vec<GofReport>, CliError> {
    let depths: Vec<f64> = profiles.iter().flat_map(|(_, d)| d[..d.len() - 1].iter().copied()).collect();
    if depths.is_empty() {
        return Err(CliError::Config("no positive coalescence depths; increase replicates".into()));
    }
    let w = scale_function(run, &reference_spec(run)?, run.tau)?;
    let tau = run.tau;
    let ks = gof_ks(&depths, |s| depth_cdf(&*w, tau, s.clamp(0.0, tau)).unwrap_or(f64::NAN))
        .map_err(CliError::from_lib)?;
    Ok(vec![ks.named("cpp depth law")])
}

pub fn cpp(run: &Run) -> Result<(), CliError> {
    let seed = run.require_seed()?;
    let header = run.header("cpp");
    let profiles = profiles(run, seed, 0)?;
    let mut out = create(&run.out.join("cpp.csv"))?;
    writeln!(out, "# schema=1 {header}")?;
    writeln!(out, "replicate,index,depth")?;
    for (i, d) in &profiles {
        for (k, a) in d.iter().enumerate() {
            writeln!(out, "{i},{},{a:.16e}", k + 1)?;
        }
    }
    out.flush()?;
    let reports: Vec<GofReport> = cpp_reports(run, &profiles)?.into_iter().map(|r| r.with_seed(seed)).collect();
    conclude(&run.out.join("cpp_reports.jsonl"), &header, reports)
}

pub fn widths(run: &Run, seed: u64, stream_base: u64) -> Result<Vec<u64>, CliError> {
    let pool = run.pool()?;
    par_map(&pool, 0..run.replicates(), |i| {
        Ok(tree(&run.spec, run.chi, run.tau, seed, stream_base + i)?.width(run.tau) as u64)
    })
}

pub fn marginal_reports(run: &Run, widths: &[u64]) -> Result<Vec<GofReport>, CliError> {
    let w = scale_function(run, &reference_spec(run)?, run.tau)?;
    let m = marginal(&*w, run.chi, run.tau).map_err(CliError::from_lib)?;
    let n = widths.len() as u64;
    let zeros = widths.iter().filter(|&&x| x == 0).count() as u64;
    let mut reports = Vec::new();
    if m.p_zero > 0.0 {
        reports.push(gof_binomial(zeros, n, m.p_zero).map_err(CliError::from_lib)?.named("marginal P(width=0)"));
    } else if zeros > 0 {
        reports.push(GofReport {
            test: "marginal P(width=0)".into(),
            statistic: zeros as f64,
            p_value: 0.0,
            n: n as usize,
            seed: None,
            pass: false,
        });
    }
    let positive: Vec<u64> = widths.iter().copied().filter(|&x| x > 0).collect();
    if positive.is_empty() {
        return Err(CliError::Config("no replicate alive at tau; increase replicates".into()));
    }
    if m.success < 1.0 {
        reports.push(
            gof_geometric(&positive, m.success)
                .map_err(CliError::from_lib)?
                .named("marginal geometric width"),
        );
    }
    Ok(reports)
}

pub fn marginal_cmd(run: &Run) -> Result<(), CliError> {
    let seed = run.require_seed()?;
    let header = run.header("marginal");
    let widths = widths(run, seed, 0)?;
    let mut out = create(&run.out.join("widths.csv"))?;
    writeln!(out, "# schema=1 {header}")?;
    writeln!(out, "replicate,width")?;
    for (i, w) in widths.iter().enumerate() {
        writeln!(out, "{i},{w}")?;
    }
    out.flush()?;
    let reports = marginal_reports(run, &widths)?
        .into_iter()
        .map(|r| r.with_seed(seed))
        .collect::<Vec<_>>();
    conclude(&run.out.join("marginal_reports.jsonl"), &header, reports)
}

pub fn plot(run: &Run) -> Result<(), CliError> {
    let header = run.header("plot");
    if let Some(file) = &run.config.plot.tree_file {
        let f = File::open(file).map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
        let t = read_jsonl(std::io::BufReader::new(f)).map_err(|e| CliError::Config(format!("{}: {e}", file.display())))?;
        return write_tree_svg(run, &t, &header);
    }
    if run.replicates() == 0 {
        eprintln!("warning: no replicates, nothing to plot");
        return Ok(());
    }
    let seed = run.require_seed()?;
    let t = tree(&run.spec, run.chi, run.cap, seed, 0)?;
    write_tree_svg(run, &t, &header)?;
    let profiles = profiles(run, seed, 0)?;
    let depths: Vec<f64> = profiles.iter().flat_map(|(_, d)| d[..d.len() - 1].iter().copied()).collect();
    if depths.is_empty() {
        eprintln!("warning: no positive coalescence depths, histogram skipped");
        return Ok(());
    }
    let w = scale_function(run, &reference_spec(run)?, run.tau)?;
    let tau = run.tau;
    let doc = svg::depth_histogram(&depths, tau, run.config.plot.bins, |s| {
        depth_cdf(&*w, tau, s.clamp(0.0, tau)).unwrap_or(f64::NAN)
    }, &header);
    let mut out = create(&run.out.join("cpp_depths.svg"))?;
    out.write_all(doc.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_tree_svg(run: &Run, t: &ChronologicalTree, header: &str) -> Result<(), CliError> {
    let finite = if t.has_infinite_lifetime() {
        t.truncate(run.cap).map_err(CliError::from_lib)?
    } else {
        t.clone()
    };
    let doc = svg::tree_and_contour(&finite, header).map_err(CliError::from_lib)?;
    let mut out = create(&run.out.join("tree.svg"))?;
    out.write_all(doc.as_bytes())?;
    out.flush()?;
    Ok(())
}
