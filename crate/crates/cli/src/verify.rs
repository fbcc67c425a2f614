//! The `verify` battery: simulated laws against their analytic forms.

use std::io::Write;

use splitree::analysis::{
    ages_residuals_sampled, gof_geometric, gof_ks, gof_ks_two_sample, gof_mean,
    gof_two_means, limit_laws, GofReport, LimitLaws,
};
use splitree::contour::{jccp, ContourPath, HeightProfile};
use splitree::levy_kernel::{LifespanSpec, PsiModel};
use splitree::simulate::{
    extinct_by, jirina_trace, sample_levy_reflected, sample_overshoot, sample_tree,
    sample_tree_detailed, RngStream,
};

use crate::commands::{
    conclude, cpp_reports, marginal_reports, par_map, profiles, reference_spec, widths,
};
use crate::config::Run;
use crate::error::CliError;

pub const SUITES: [&str; 8] = [
    "marginal",
    "cpp",
    "levy-equivalence",
    "jirina",
    "local-times",
    "ages",
    "split",
    "limits",
];

/// Tolerance for "the path sits at tau".
const BARRIER_TOL: f64 = 1e-9;
/// Vertex budget for trees grown in the ages and split suites.
const BUDGET: usize = 5_000_000;
/// Levels for the large-tau limit suites, by criticality.
const LIMIT_TAU_SUB: f64 = 30.0;
const LIMIT_TAU_CRIT: f64 = 100.0;
const LIMIT_TAU_SUPER: f64 = 25.0;
/// Supercritical trees grow like `e^{eta tau}`; the level is lowered so the
/// expected population stays near this.
const LIMIT_POPULATION: f64 = 1000.0;

fn lib(e: impl std::fmt::Display) -> CliError {
    CliError::from_lib(e)
}

/// Each suite draws from its own block of streams.
fn streams(suite: usize, part: u64) -> u64 {
    ((suite as u64) << 40) | (part << 36)
}

pub fn verify(run: &Run) -> Result<(), CliError> {
    let seed = run.require_seed()?;
    let header = run.header("verify");
    let mut reports = Vec::new();
    for name in &run.config.verify.suites {
        let idx = SUITES.iter().position(|s| s == name).expect("validated");
        let suite = match name.as_str() {
            "marginal" => marginal(run, seed, idx),
            "cpp" => cpp(run, seed, idx),
            "levy-equivalence" => levy_equivalence(run, seed, idx),
            "jirina" => jirina(run, seed, idx),
            "local-times" => local_times(run, seed, idx),
            "ages" => ages(run, seed, idx),
            "split" => split(run, seed, idx),
            "limits" => limits(run, seed, idx),
            _ => unreachable!("validated"),
        }?;
        reports.extend(suite.into_iter().map(|r| {
            let test = format!("{name}: {}", r.test);
            r.named(test).with_seed(seed)
        }));
    }
    let verdict = conclude(&run.out.join("verify.jsonl"), &header, reports);
    std::io::stdout().flush()?;
    verdict
}

fn marginal(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let w = widths(run, seed, streams(idx, 0))?;
    marginal_reports(run, &w)
}

fn cpp(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let p = profiles(run, seed, streams(idx, 0))?;
    cpp_reports(run, &p)
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

fn levy_equivalence(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let pool = run.pool()?;
    let n = run.replicates();
    let (spec, chi, tau) = (&run.spec, run.chi, run.tau);
    let a = par_map(&pool, 0..n, |i| {
        let t = sample_tree(spec, chi, tau, &mut RngStream::new(seed, streams(idx, 0) + i).rng()).map_err(lib)?;
        Ok(path_stats(&jccp(&t).map_err(lib)?, tau))
    })?;
    let b = par_map(&pool, 0..n, |i| {
        let p = sample_levy_reflected(spec, chi, tau, &mut RngStream::new(seed, streams(idx, 1) + i).rng())
            .map_err(lib)?;
        Ok(path_stats(&p, tau))
    })?;
    let col = |s: &[PathStats], f: fn(&PathStats) -> Option<f64>| s.iter().filter_map(f).collect::<Vec<f64>>();
    let mut out = Vec::new();
    for (name, f) in [
        ("kill time", (|s: &PathStats| Some(s.kill)) as fn(&PathStats) -> Option<f64>),
        ("visits to tau", |s| Some(s.visits)),
        ("first excursion minimum", |s| s.excursion_min),
    ] {
        let (x, y) = (col(&a, f), col(&b, f));
        if x.is_empty() || y.is_empty() {
            continue;
        }
        out.push(gof_ks_two_sample(&x, &y).map_err(lib)?.named(name));
    }
    Ok(out)
}

fn jirina(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let pool = run.pool()?;
    let spec = &run.spec;
    let model = PsiModel::new(spec.clone());
    let chi = run.chi;
    let gens = 3;
    let traces = par_map(&pool, 0..run.replicates(), |i| {
        jirina_trace(spec, chi, gens, &mut RngStream::new(seed, streams(idx, 0) + i).rng()).map_err(lib)
    })?;
    let lambda = 1.0;
    let mut f = lambda;
    let mut out = Vec::new();
    for k in 1..=gens {
        // E exp(-lambda Z_k) = exp(-chi F^k(lambda))
        f = model.f(f).map_err(lib)?;
        let sample: Vec<f64> = traces.iter().map(|t| (-lambda * t.values()[k]).exp()).collect();
        out.push(
            gof_mean(&sample, (-chi * f).exp())
                .map_err(lib)?
                .named(format!("Laplace transform of Z_{k} at {lambda}")),
        );
    }
    Ok(out)
}

fn local_times(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let pool = run.pool()?;
    let n = run.replicates();
    let errors = par_map(&pool, 0..n, |i| {
        let t = sample_tree(&run.spec, run.chi, run.cap, &mut RngStream::new(seed, streams(idx, 0) + i).rng())
            .map_err(lib)?;
        let l = HeightProfile::new(&jccp(&t).map_err(lib)?).local_times();
        let z = t.generation_lengths();
        if l.len() != z.len() {
            return Ok(f64::INFINITY);
        }
        Ok(l.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    })?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let pass = worst <= 1e-9;
    Ok(vec![GofReport {
        test: "max |L_n - Z_n|".into(),
        statistic: worst,
        p_value: if pass { 1.0 } else { 0.0 },
        n: n as usize,
        seed: None,
        pass,
    }])
}

/// Ages and residual lifetimes at `tau` of everybody alive but the first.
fn rest_pairs(run: &Run, seed: u64, stream: u64) -> Result<Vec<(f64, f64)>, CliError> {
    let pool = run.pool()?;
    let (tau, spec, chi) = (run.tau, &run.spec, run.chi);
    let per = par_map(&pool, 0..run.replicates(), |i| {
        let s = sample_tree_detailed(spec, chi, tau, BUDGET, &mut RngStream::new(seed, stream + i).rng())
            .map_err(lib)?;
        if !s.survives_to_cap() {
            return Ok(Vec::new());
        }
        Ok(ages_residuals_sampled(&s, tau).map_err(lib)?.rest().to_vec())
    })?;
    Ok(per.into_iter().flatten().collect())
}

fn overshoots(spec: &LifespanSpec, tau: f64, seed: u64, stream: u64, want: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let mut out = Vec::with_capacity(want);
    let mut i = 0;
    while out.len() < want {
        if let Some(o) = sample_overshoot(spec, tau, &mut RngStream::new(seed, stream + i).rng()).map_err(lib)? {
            out.push((o.undershoot, o.overshoot));
        }
        i += 1;
    }
    Ok(out)
}

fn joint(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs.iter().map(|&(a, r)| (1.0 - (-a).exp()) * (1.0 - (-r).exp())).collect()
}

fn ages(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let pairs = rest_pairs(run, seed, streams(idx, 0))?;
    if pairs.is_empty() {
        return Err(CliError::Config("nobody besides the first is alive at tau; increase replicates".into()));
    }
    let reference = overshoots(&reference_spec(run)?, run.tau, seed, streams(idx, 1), pairs.len())?;
    let first = |v: &[(f64, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
    let second = |v: &[(f64, f64)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
    Ok(vec![
        gof_ks_two_sample(&first(&pairs), &first(&reference)).map_err(lib)?.named("age law"),
        gof_ks_two_sample(&second(&pairs), &second(&reference)).map_err(lib)?.named("residual law"),
        // joint law through a bounded product, finite even for infinite residuals
        gof_two_means(&joint(&pairs), &joint(&reference))
            .map_err(lib)?
            .named("joint age-residual moment"),
    ])
}

fn split(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let model = PsiModel::new(reference_spec(run)?);
    let eta = model.eta();
    if eta == 0.0 {
        // no infinite descendance to split off
        return Ok(Vec::new());
    }
    let pairs = rest_pairs(run, seed, streams(idx, 0))?;
    if pairs.is_empty() {
        return Err(CliError::Config("nobody besides the first is alive at tau; increase replicates".into()));
    }
    let margin = run.config.verify.horizon_margin;
    let spec = &run.spec;
    let pool = run.pool()?;
    let base = streams(idx, 1);
    // survival of a residual lifetime r is 1 - exp(-eta r) by the branching property
    let survived = par_map(&pool, 0..pairs.len() as u64, |i| {
        let r = pairs[i as usize].1;
        let dies = extinct_by(spec, r, margin, &mut RngStream::new(seed, base + i).rng()).map_err(lib)?;
        Ok(if dies { 0.0 } else { 1.0 })
    })?;
    let excess: Vec<f64> = survived
        .iter()
        .zip(&pairs)
        .map(|(s, p)| s - (1.0 - (-eta * p.1).exp()))
        .collect();
    let reference = overshoots(model.spec(), run.tau, seed, streams(idx, 2), pairs.len())?;
    let predicted: Vec<f64> = reference.iter().map(|o| 1.0 - (-eta * o.1).exp()).collect();
    Ok(vec![
        gof_mean(&excess, 0.0).map_err(lib)?.named("survival given residual"),
        gof_two_means(&survived, &predicted).map_err(lib)?.named("fraction with infinite descendance"),
    ])
}

/// Large-`tau` limits of the width. Started from `chi = tau` the conditional
/// law given survival is the one of any `chi`, and every tree survives.
fn limits(run: &Run, seed: u64, idx: usize) -> Result<Vec<GofReport>, CliError> {
    let model = PsiModel::new(reference_spec(run)?);
    let laws = limit_laws(&model).map_err(lib)?;
    let tau = match laws {
        LimitLaws::Yaglom { .. } => LIMIT_TAU_SUB,
        LimitLaws::Critical { .. } => LIMIT_TAU_CRIT,
        LimitLaws::Supercritical { eta, .. } => LIMIT_TAU_SUPER.min(LIMIT_POPULATION.ln() / eta),
    };
    let pool = run.pool()?;
    let spec = &run.spec;
    let widths = par_map(&pool, 0..run.replicates(), |i| {
        let t = sample_tree(spec, tau, tau, &mut RngStream::new(seed, streams(idx, 0) + i).rng()).map_err(lib)?;
        Ok(t.width(tau) as u64)
    })?;
    Ok(vec![match laws {
        LimitLaws::Yaglom { m } => gof_geometric(&widths, 1.0 - m).map_err(lib)?.named(format!("Yaglom law at tau={tau}")),
        LimitLaws::Critical { rate } => {
            let scaled: Vec<f64> = widths.iter().map(|&x| x as f64 / tau).collect();
            gof_ks(&scaled, |x| 1.0 - (-rate * x.max(0.0)).exp())
                .map_err(lib)?
                .named(format!("exponential limit of width/tau at tau={tau}"))
        }
        LimitLaws::Supercritical { eta, rate, .. } => {
            let scaled: Vec<f64> = widths.iter().map(|&x| x as f64 * (-eta * tau).exp()).collect();
            gof_ks(&scaled, |x| 1.0 - (-rate * x.max(0.0)).exp())
                .map_err(lib)?
                .named(format!("exponential limit of e^(-eta tau) width at tau={tau}"))
        }
    }])
}

