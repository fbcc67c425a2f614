//! Goodness-of-fit tests: chi-square against a geometric law, one- and
//! two-sample Kolmogorov–Smirnov with asymptotic p-values.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use super::AnalysisError;

/// Significance level of every pass/fail verdict.
pub const ALPHA: f64 = 0.01;
/// Smallest expected count of a chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub pass: bool,
}

impl GofReport {
    fn new(test: &str, statistic: f64, p_value: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test: test.to_string(),
            statistic,
            p_value,
            n,
            seed: None,
            pass: p_value > ALPHA,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.test = name.into();
        self
    }
}

/// Chi-square test of a sample on `{1, 2, ...}` against
/// `P(X = k) = (1-p)^{k-1} p`. Cells `{k}` are kept while both the cell and
/// the remaining tail expect at least five observations; the rest is pooled
/// into one tail cell.
pub fn gof_geometric(sample: &[u64], success: f64) -> Result<GofReport, AnalysisError> {
    if sample.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if !(success > 0.0 && success < 1.0) {
        return Err(AnalysisError::Degenerate(format!(
            "success probability {success} must lie in (0, 1)"
        )));
    }
    if let Some(&bad) = sample.iter().find(|&&k| k == 0) {
        return Err(AnalysisError::Degenerate(format!("value {bad} outside support")));
    }
    let n = sample.len() as f64;
    let q = 1.0 - success;
    // expected[k-1] for singleton cells, then the tail
    let mut expected = Vec::new();
    let mut k = 1u64;
    loop {
        let cell = n * success * q.powi(k as i32 - 1);
        let tail_after = n * q.powi(k as i32);
        if cell >= MIN_EXPECTED && tail_after >= MIN_EXPECTED {
            expected.push(cell);
            k += 1;
        } else {
            expected.push(n * q.powi(k as i32 - 1));
            break;
        }
    }
    if expected.len() < 2 {
        return Err(AnalysisError::Degenerate(
            "too few observations for two chi-square cells".into(),
        ));
    }
    let tail_start = expected.len() as u64;
    let mut observed = vec![0u64; expected.len()];
    for &x in sample {
        let cell = x.min(tail_start) as usize - 1;
        observed[cell] += 1;
    }
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (expected.len() - 1) as f64;
    let p = ChiSquared::new(df)
        .map_err(|e| AnalysisError::Degenerate(e.to_string()))?
        .sf(stat);
    Ok(GofReport::new("chi2-geometric", stat, p, sample.len()))
}

/// Kolmogorov survival function `Q(x) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 x^2}`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if sample.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(AnalysisError::Degenerate("sample contains NaN".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test against a continuous CDF.
pub fn gof_ks<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<GofReport, AnalysisError> {
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let mut j = i;
        while j < v.len() && v[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max(j as f64 / n - f);
        i = j;
    }
    Ok(GofReport::new("ks", d, ks_p_value(d, n), v.len()))
}

/// Two-sample KS statistic `sup |F_a - F_b|`, handling ties.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn gof_ks_two_sample(a: &[f64], b: &[f64]) -> Result<GofReport, AnalysisError> {
    let d = ks_two_sample_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(GofReport::new("ks-2sample", d, ks_p_value(d, na * nb / (na + nb)), a.len() + b.len()))
}

/// Two-sided normal p-value of a z-score.
fn normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Normal approximation to the binomial: `k` successes out of `n` against
/// success probability `p`.
pub fn gof_binomial(k: u64, n: u64, p: f64) -> Result<GofReport, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptySample);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(AnalysisError::Degenerate(format!("probability {p} must lie in (0, 1)")));
    }
    let nf = n as f64;
    let z = (k as f64 - nf * p) / (nf * p * (1.0 - p)).sqrt();
    Ok(GofReport::new("z-binomial", z, normal_p(z), n as usize))
}

/// `diff / se`, where a zero standard error (constant samples) makes the
/// comparison exact.
fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// z-test of a sample mean against `target`.
pub fn gof_mean(sample: &[f64], target: f64) -> Result<GofReport, AnalysisError> {
    if sample.len() < 2 {
        return Err(AnalysisError::Degenerate("mean test needs two observations".into()));
    }
    let (mean, se) = super::mean_se(sample);
    let z = z_score(mean - target, se);
    Ok(GofReport::new("z-mean", z, normal_p(z), sample.len()))
}

/// z-test of equal means of two independent samples.
pub fn gof_two_means(a: &[f64], b: &[f64]) -> Result<GofReport, AnalysisError> {
    let (ma, sa) = super::mean_se(a);
    let (mb, sb) = super::mean_se(b);
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::Degenerate("mean test needs two observations per sample".into()));
    }
    let z = z_score(ma - mb, (sa * sa + sb * sb).sqrt());
    Ok(GofReport::new("z-two-means", z, normal_p(z), a.len() + b.len()))
}

/// Holm step-down adjusted p-values: rejecting where the adjusted value is
/// at most `ALPHA` bounds the family-wise error rate by `ALPHA`.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![0.0; n];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((n - rank) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    out
}
