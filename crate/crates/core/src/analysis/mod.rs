//! Analytic laws of splitting trees and the statistics extracted from
//! sampled trees to check them: coalescent point process, width marginals,
//! extinction, ages and residual lifetimes, descendance split, limit laws.

mod gof;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chrono_tree::{ChronologicalTree, NodeId, TreeError, TreePoint};
use crate::levy_kernel::{Criticality, KernelError, LifespanSpec, PsiModel, ScaleFunction};
use crate::simulate::{extinct_by, SampledTree, SimError};

pub use gof::{
    gof_binomial, gof_geometric, gof_ks, gof_ks_two_sample, gof_mean, gof_two_means,
    holm_adjust, kolmogorov_sf, ks_two_sample_statistic, GofReport, ALPHA, MIN_EXPECTED,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("nobody is alive at level {0}")]
    NobodyAlive(f64),
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },
    #[error("residual lifetime at level {tau} is censored by the cap {cap}")]
    Censored { tau: f64, cap: f64 },
    #[error("the critical limit law needs a finite second moment")]
    NoSecondMoment,
    #[error("empty sample")]
    EmptySample,
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Coalescence levels `a_1, ..., a_{n-1}` of consecutive individuals alive
/// at `tau` (in linear order), followed by the terminal `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescentProfile {
    pub tau: f64,
    pub depths: Vec<f64>,
}

impl CoalescentProfile {
    pub fn width(&self) -> usize {
        self.depths.len()
    }

    /// The positive depths, i.e. without the terminal zero.
    pub fn positive(&self) -> &[f64] {
        &self.depths[..self.depths.len() - 1]
    }

    /// Coalescence level of the `j`-th and `k`-th alive individuals
    /// (0-based, `j < k`): `min{a_i : j <= i < k}`.
    pub fn pairwise_level(&self, j: usize, k: usize) -> f64 {
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        self.depths[j..k].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Individuals alive at `tau`, sorted in linear order.
pub fn alive_in_linear_order(tree: &ChronologicalTree, tau: f64) -> Result<Vec<NodeId>, AnalysisError> {
    let mut alive: Vec<NodeId> = tree.alive_at(tau).collect();
    let mut err = None;
    alive.sort_by(|&x, &y| {
        let px = TreePoint::new(tree.label(x), tau);
        let py = TreePoint::new(tree.label(y), tau);
        tree.linear_compare(&px, &py).unwrap_or_else(|e| {
            err = Some(e);
            std::cmp::Ordering::Equal
        })
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(alive),
    }
}

pub fn coalescent_profile(tree: &ChronologicalTree, tau: f64) -> Result<CoalescentProfile, AnalysisError> {
    let alive = alive_in_linear_order(tree, tau)?;
    if alive.is_empty() {
        return Err(AnalysisError::NobodyAlive(tau));
    }
    let points: Vec<TreePoint> = alive.iter().map(|&id| TreePoint::new(tree.label(id), tau)).collect();
    let mut depths = Vec::with_capacity(points.len());
    for pair in points.windows(2) {
        depths.push(tree.coalescence_point(&pair[0], &pair[1])?.level);
    }
    depths.push(0.0);
    Ok(CoalescentProfile { tau, depths })
}

fn check_unit(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), AnalysisError> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(AnalysisError::OutOfRange {
            name,
            value,
            range: format!("[{lo}, {hi}]"),
        })
    }
}

/// `P(C <= sigma)` for the coalescence time `C = tau - A` of two
/// consecutive individuals: `(1 - 1/W(sigma)) / (1 - 1/W(tau))`.
pub fn coalescence_cdf<S: ScaleFunction + ?Sized>(w: &S, tau: f64, sigma: f64) -> Result<f64, AnalysisError> {
    check_unit("sigma", sigma, 0.0, tau)?;
    Ok((1.0 - 1.0 / w.w(sigma)) / (1.0 - 1.0 / w.w(tau)))
}

/// `P(A <= sigma | A > 0)` for a positive coalescence level, using
/// `P(A <= sigma) = 1/W(tau - sigma)`.
pub fn depth_cdf<S: ScaleFunction + ?Sized>(w: &S, tau: f64, sigma: f64) -> Result<f64, AnalysisError> {
    check_unit("sigma", sigma, 0.0, tau)?;
    let atom = 1.0 / w.w(tau);
    Ok(((1.0 / w.w(tau - sigma) - atom) / (1.0 - atom)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    /// `P_chi(Xi_tau = 0) = W(tau - chi) / W(tau)`.
    pub p_zero: f64,
    /// Success probability `1 / W(tau)` of the conditional geometric law.
    pub success: f64,
    /// `E_chi(Xi_tau | Xi_tau != 0) = W(tau)`.
    pub mean_conditional: f64,
}

pub fn marginal<S: ScaleFunction + ?Sized>(w: &S, chi: f64, tau: f64) -> Result<Marginal, AnalysisError> {
    for (name, v) in [("chi", chi), ("tau", tau)] {
        if !(v > 0.0) {
            return Err(AnalysisError::OutOfRange {
                name,
                value: v,
                range: "(0, inf)".into(),
            });
        }
    }
    let wt = w.w(tau);
    let p_zero = if chi > tau { 0.0 } else { w.w(tau - chi) / wt };
    Ok(Marginal {
        p_zero,
        success: 1.0 / wt,
        mean_conditional: wt,
    })
}

/// `P_chi(Ext) = e^{-eta chi}`.
pub fn extinction_prob(model: &PsiModel, chi: f64) -> Result<f64, AnalysisError> {
    if !(chi > 0.0) {
        return Err(AnalysisError::OutOfRange {
            name: "chi",
            value: chi,
            range: "(0, inf]".into(),
        });
    }
    Ok((-model.eta() * chi).exp())
}

/// Limits of the width `Xi_tau` as `tau -> inf`, conditional on survival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitLaws {
    /// `P(Xi = n) -> m^{n-1} (1 - m)`.
    Yaglom { m: f64 },
    /// `P(Xi/tau > x) -> exp(-rate x)` with `rate = psi''(0+)/2`.
    Critical { rate: f64 },
    /// `e^{-eta tau} Xi -> Exp(rate)` with `rate = psi'(eta)`, and a fraction
    /// `p = psi'(eta)` of the population has infinite descendance.
    Supercritical { eta: f64, rate: f64, split: f64 },
}

impl LimitLaws {
    pub fn yaglom_pmf(&self, n: u64) -> Option<f64> {
        match *self {
            LimitLaws::Yaglom { m } if n >= 1 => Some(m.powi(n as i32 - 1) * (1.0 - m)),
            LimitLaws::Yaglom { .. } => Some(0.0),
            _ => None,
        }
    }
}

pub fn limit_laws(model: &PsiModel) -> Result<LimitLaws, AnalysisError> {
    Ok(match model.criticality() {
        Criticality::Subcritical => LimitLaws::Yaglom { m: model.spec().m() },
        Criticality::Critical => {
            let second = model.psi_second(0.0)?;
            if !second.is_finite() {
                return Err(AnalysisError::NoSecondMoment);
            }
            LimitLaws::Critical { rate: second / 2.0 }
        }
        Criticality::Supercritical => {
            let p = model.psi_prime(model.eta())?;
            LimitLaws::Supercritical {
                eta: model.eta(),
                rate: p,
                split: p,
            }
        }
    })
}

/// Ages `A_i = tau - alpha(u_i)` and residual lifetimes `R_i = omega(u_i) - tau`
/// of the individuals alive at `tau`, in linear order. The first entry is
/// `u_1`, which is not exchangeable with the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeResidual {
    pub tau: f64,
    pub entries: Vec<(f64, f64)>,
}

impl AgeResidual {
    pub fn first(&self) -> (f64, f64) {
        self.entries[0]
    }

    /// The i.i.d. part, `u_2, ..., u_n`.
    pub fn rest(&self) -> &[(f64, f64)] {
        &self.entries[1..]
    }
}

fn ages_with<F: Fn(NodeId) -> f64>(
    tree: &ChronologicalTree,
    tau: f64,
    omega: F,
    cap: Option<f64>,
) -> Result<AgeResidual, AnalysisError> {
    let alive = alive_in_linear_order(tree, tau)?;
    if alive.is_empty() {
        return Err(AnalysisError::NobodyAlive(tau));
    }
    let mut entries = Vec::with_capacity(alive.len());
    for id in alive {
        let w = omega(id);
        if let Some(cap) = cap {
            if w >= cap {
                return Err(AnalysisError::Censored { tau, cap });
            }
        }
        entries.push((tau - tree.alpha(id), w - tau));
    }
    Ok(AgeResidual { tau, entries })
}

/// Ages and residuals read from the tree. If the tree was truncated at
/// `cap`, pass it: a death level at the cap is censored and reported.
pub fn ages_residuals(tree: &ChronologicalTree, tau: f64, cap: Option<f64>) -> Result<AgeResidual, AnalysisError> {
    ages_with(tree, tau, |id| tree.omega(id), cap)
}

/// Ages and residuals of a sampled tree, using the unclipped death levels.
pub fn ages_residuals_sampled(sampled: &SampledTree, tau: f64) -> Result<AgeResidual, AnalysisError> {
    ages_with(&sampled.tree, tau, |id| sampled.raw_omega(id), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthStats {
    pub tau: f64,
    pub horizon: f64,
    pub xi: u64,
    pub xi_inf: u64,
    pub xi_fin: u64,
    /// `e^{-eta (horizon - tau)}`, the nominal misclassification bound of
    /// using survival to `horizon` as a proxy for infinite descendance.
    pub misclassification_bound: f64,
}

/// Whether the subtree above `(u, tau)` reaches `horizon`, read from a tree
/// whose cap is at least `horizon`.
fn reaches_in_tree(tree: &ChronologicalTree, u: NodeId, tau: f64, horizon: f64) -> bool {
    if tree.omega(u) >= horizon {
        return true;
    }
    let mut stack: Vec<NodeId> = tree.children(u).iter().copied().filter(|&c| tree.alpha(c) > tau).collect();
    while let Some(v) = stack.pop() {
        if tree.omega(v) >= horizon {
            return true;
        }
        stack.extend_from_slice(tree.children(v));
    }
    false
}

/// Splits the individuals alive at `tau` by whether their descendance
/// survives to `horizon`. The existing tree is read when its cap reaches
/// `horizon`; otherwise each residual lifetime is continued by simulation.
pub fn descendance_split<R: Rng + ?Sized>(
    model: &PsiModel,
    sampled: &SampledTree,
    tau: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<WidthStats, AnalysisError> {
    if !(horizon > tau) {
        return Err(AnalysisError::OutOfRange {
            name: "horizon",
            value: horizon,
            range: format!("({tau}, inf)"),
        });
    }
    let tree = &sampled.tree;
    let spec: &LifespanSpec = model.spec();
    let alive: Vec<NodeId> = tree.alive_at(tau).collect();
    let mut xi_inf = 0;
    for &u in &alive {
        let survives = if sampled.cap >= horizon {
            reaches_in_tree(tree, u, tau, horizon)
        } else {
            let residual = sampled.raw_omega(u) - tau;
            // dying exactly at tau leaves no descendance beyond it
            residual > 0.0
                && (residual >= horizon - tau || !extinct_by(spec, residual, horizon - tau, rng)?)
        };
        xi_inf += survives as u64;
    }
    let xi = alive.len() as u64;
    Ok(WidthStats {
        tau,
        horizon,
        xi,
        xi_inf,
        xi_fin: xi - xi_inf,
        misclassification_bound: (-model.eta() * (horizon - tau)).exp(),
    })
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Pearson correlation of paired samples.
pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
