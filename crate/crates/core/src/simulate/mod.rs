//! Random generation: splitting trees, the reflected Lévy process, overshoots
//! and Jirina traces.
//!
//! Every sampler takes a `&mut R: Rng`; reproducible experiments draw the
//! generator from an [`RngStream`], one stream per replicate.

mod levy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::chrono_tree::{ChronologicalTree, NodeId};
use crate::levy_kernel::{KernelError, LifespanSpec};

pub use levy::{
    jirina_trace, sample_levy_reflected, sample_overshoot, sample_subordinator_value,
    JirinaTrace, Overshoot,
};

/// Largest generation a sampled tree may reach.
pub const DEPTH_LIMIT: usize = 1_000_000;
/// Default cap on the number of vertices of one sampled tree.
pub const DEFAULT_VERTEX_BUDGET: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{0} must be finite")]
    Infinite(&'static str),
    #[error("an infinite ancestor lifespan needs immortal offspring mass (q > 0)")]
    InfiniteChi,
    #[error("tree exceeded the vertex budget of {0}")]
    Budget(usize),
    #[error("tree exceeded the generation limit of {DEPTH_LIMIT}")]
    DepthExceeded,
}

/// `(seed, index) -> ChaCha8` stream: the 64-bit seed is expanded by
/// `seed_from_u64` and the index selects the ChaCha stream, so distinct
/// indices never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// A sampled tree plus the unclipped death level of every vertex.
#[derive(Debug, Clone)]
pub struct SampledTree {
    pub tree: ChronologicalTree,
    /// `raw_omega[id]` is `alpha + zeta` before clipping at the cap.
    pub raw_omega: Vec<f64>,
    pub cap: f64,
}

impl SampledTree {
    pub fn raw_omega(&self, id: NodeId) -> f64 {
        self.raw_omega[id.0]
    }

    /// Some individual is alive at the cap.
    pub fn survives_to_cap(&self) -> bool {
        self.tree.width(self.cap) > 0
    }
}

#[derive(Debug, Clone)]
enum Growth {
    Complete(SampledTree),
    ReachedCap,
}

fn check_inputs(spec: &LifespanSpec, chi: f64, cap: f64) -> Result<(), SimError> {
    if !(cap > 0.0) {
        return Err(SimError::NonPositive { name: "tau_cap", value: cap });
    }
    if !cap.is_finite() {
        return Err(SimError::Infinite("tau_cap"));
    }
    if !(chi > 0.0) {
        return Err(SimError::NonPositive { name: "chi", value: chi });
    }
    if chi.is_infinite() && spec.q() == 0.0 {
        return Err(SimError::InfiniteChi);
    }
    Ok(())
}

/// Grows the splitting tree truncated at `cap` in contour order (children
/// by decreasing birth level, depth first). With `stop_at_cap`, gives up as
/// soon as some individual is alive at `cap`.
fn grow<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    cap: f64,
    stop_at_cap: bool,
    budget: usize,
    rng: &mut R,
) -> Result<Growth, SimError> {
    check_inputs(spec, chi, cap)?;
    if stop_at_cap && chi >= cap {
        return Ok(Growth::ReachedCap);
    }
    let gap = Exp::new(spec.b()).map_err(|_| KernelError::NonPositiveMass(spec.b()))?;
    let mut tree = ChronologicalTree::new(chi.min(cap)).expect("chi > 0");
    let mut raw_omega = vec![chi];
    let mut stack = vec![ChronologicalTree::ROOT];
    let mut births: Vec<(f64, f64)> = Vec::new();
    while let Some(v) = stack.pop() {
        if tree.generation(v) >= DEPTH_LIMIT {
            return Err(SimError::DepthExceeded);
        }
        let (a, w) = (tree.alpha(v), tree.omega(v));
        // Poisson births on (a, w), generated from the top down
        births.clear();
        let mut s = w;
        loop {
            s -= gap.sample(rng);
            if s <= a {
                break;
            }
            let zeta = spec.sample_lifespan(rng)?;
            let raw = s + zeta;
            if stop_at_cap && raw >= cap {
                return Ok(Growth::ReachedCap);
            }
            births.push((s, raw));
        }
        if tree.len() + births.len() > budget {
            return Err(SimError::Budget(budget));
        }
        // labels: larger clipped lifespan first, then later birth first
        let mut labelled = births.clone();
        labelled.sort_by(|x, y| {
            let zx = x.1.min(cap) - x.0;
            let zy = y.1.min(cap) - y.0;
            zy.total_cmp(&zx).then(y.0.total_cmp(&x.0))
        });
        let first = tree.len();
        for &(alpha, raw) in &labelled {
            tree.push_child_unchecked(v, alpha, raw.min(cap));
            raw_omega.push(raw);
        }
        // explore the latest-born child first
        let mut kids: Vec<NodeId> = (first..tree.len()).map(NodeId).collect();
        kids.sort_by(|x, y| tree.alpha(*x).total_cmp(&tree.alpha(*y)));
        stack.extend(kids);
    }
    Ok(Growth::Complete(SampledTree { tree, raw_omega, cap }))
}

/// The splitting tree with ancestor lifespan `chi`, truncated at `tau_cap`.
pub fn sample_tree<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    tau_cap: f64,
    rng: &mut R,
) -> Result<ChronologicalTree, SimError> {
    sample_tree_detailed(spec, chi, tau_cap, DEFAULT_VERTEX_BUDGET, rng).map(|s| s.tree)
}

/// As [`sample_tree`], also keeping the unclipped death levels.
pub fn sample_tree_detailed<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    tau_cap: f64,
    budget: usize,
    rng: &mut R,
) -> Result<SampledTree, SimError> {
    match grow(spec, chi, tau_cap, false, budget, rng)? {
        Growth::Complete(t) => Ok(t),
        Growth::ReachedCap => unreachable!("no early stop requested"),
    }
}

/// Samples the tree only if it dies out below `tau_cap`; `None` as soon as
/// some individual is seen alive at `tau_cap`. The cost of a surviving tree
/// is that of the contour's first passage above `tau_cap`.
pub fn sample_extinct<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    tau_cap: f64,
    rng: &mut R,
) -> Result<Option<SampledTree>, SimError> {
    Ok(match grow(spec, chi, tau_cap, true, DEFAULT_VERTEX_BUDGET, rng)? {
        Growth::Complete(t) => Some(t),
        Growth::ReachedCap => None,
    })
}

/// Whether the tree is extinct by `tau_cap`.
pub fn extinct_by<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    tau_cap: f64,
    rng: &mut R,
) -> Result<bool, SimError> {
    sample_extinct(spec, chi, tau_cap, rng).map(|t| t.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{jccp, HeightProfile};
    use crate::levy_kernel::{PsiModel, ScaleFunction};

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, index| -> Vec<u64> {
            let mut rng = RngStream::new(seed, index).rng();
            (0..4).map(|_| rng.random()).collect()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn input_validation() {
        let spec = LifespanSpec::exponential(1.0, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(matches!(
            sample_tree(&spec, f64::INFINITY, 3.0, &mut rng),
            Err(SimError::InfiniteChi)
        ));
        assert!(sample_tree(&spec, 1.0, 0.0, &mut rng).is_err());
        assert!(sample_tree(&spec, 1.0, f64::INFINITY, &mut rng).is_err());
        assert!(sample_tree(&spec, -1.0, 3.0, &mut rng).is_err());
        let yule = LifespanSpec::yule(0.5).unwrap();
        let t = sample_tree(&yule, f64::INFINITY, 2.0, &mut rng).unwrap();
        assert_eq!(t.omega(ChronologicalTree::ROOT), 2.0);
    }

    #[test]
    fn trees_are_valid_and_deterministic() {
        let spec = LifespanSpec::exponential(1.2, 1.0).unwrap();
        for i in 0..50 {
            let t1 = sample_tree(&spec, 1.0, 5.0, &mut RngStream::new(11, i).rng()).unwrap();
            let t2 = sample_tree(&spec, 1.0, 5.0, &mut RngStream::new(11, i).rng()).unwrap();
            assert_eq!(t1, t2);
            let again = ChronologicalTree::from_vertices(t1.vertices()).unwrap();
            assert_eq!(again.vertices(), t1.vertices());
            assert!(t1.height() <= 5.0);
            let h = HeightProfile::new(&jccp(&t1).unwrap());
            let z = t1.generation_lengths();
            for (l, z) in h.local_times().iter().zip(&z) {
                assert!((l - z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn siblings_labelled_by_clipped_lifespan() {
        let spec = LifespanSpec::exponential(2.0, 0.5).unwrap();
        let t = sample_tree(&spec, 3.0, 4.0, &mut RngStream::new(5, 0).rng()).unwrap();
        for id in t.ids() {
            let z: Vec<f64> = t.children(id).iter().map(|&c| t.lifespan_of(c)).collect();
            assert!(z.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn root_offspring_mean() {
        // E[number of root children] = b * min(chi, cap)
        let spec = LifespanSpec::exponential(0.3, 1.0).unwrap();
        let n = 20_000;
        let total: usize = (0..n)
            .map(|i| {
                let t = sample_tree(&spec, 2.0, 10.0, &mut RngStream::new(3, i).rng()).unwrap();
                t.children(ChronologicalTree::ROOT).len()
            })
            .sum();
        let mean = total as f64 / n as f64;
        let se = (0.6f64 / n as f64).sqrt();
        assert!((mean - 0.6).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn yule_width_is_geometric() {
        // Xi_tau for Yule(b) from an immortal ancestor: P(Xi = 1) = e^{-b tau}
        let b = 0.7;
        let tau = 1.5;
        let spec = LifespanSpec::yule(b).unwrap();
        let n = 20_000;
        let ones = (0..n)
            .filter(|&i| {
                let t = sample_tree(&spec, f64::INFINITY, tau, &mut RngStream::new(9, i).rng()).unwrap();
                t.width(tau) == 1
            })
            .count();
        let p = (-b * tau).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn extinction_probability_small_run() {
        let spec = LifespanSpec::exponential(1.2, 1.0).unwrap();
        let n = 10_000;
        let ext = (0..n)
            .filter(|&i| extinct_by(&spec, 1.0, 60.0, &mut RngStream::new(21, i).rng()).unwrap())
            .count();
        let p = (-0.2f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ext as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn zero_width_probability_matches_scale_ratio() {
        let spec = LifespanSpec::exponential(1.2, 1.0).unwrap();
        let w = PsiModel::new(spec.clone()).closed_form_scale().unwrap();
        let n = 20_000;
        let zeros = (0..n)
            .filter(|&i| sample_tree(&spec, 1.0, 3.0, &mut RngStream::new(2, i).rng()).unwrap().width(3.0) == 0)
            .count();
        let p = w.w(2.0) / w.w(3.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
