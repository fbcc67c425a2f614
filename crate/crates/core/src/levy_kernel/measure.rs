//! Finite lifespan measures on `(0, +inf]`.
//!
//! A measure is stored as its total mass `b` together with a normalized law
//! `Lambda / b`. Every supported law is compiled into a list of [`Window`]s,
//! a piecewise-exponential description of the normalized tail
//! `P(zeta >= u)`, which is what the Laplace exponent and the scale-function
//! kernel actually consume. Sampling works on the law itself.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};
use serde::{Deserialize, Serialize};

use super::KernelError;

/// Tolerance on mixture weights summing to one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Attempts allowed per draw when sampling a tilted law by rejection.
pub const REJECTION_CAP: usize = 1_000_000;

/// Piecewise-constant hazard: rate `rates[i]` on `[breaks[i], breaks[i+1])`,
/// the last rate extending to infinity. `breaks[0]` is always `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseHazard {
    pub breaks: Vec<f64>,
    pub rates: Vec<f64>,
}

impl PiecewiseHazard {
    pub fn new(breaks: Vec<f64>, rates: Vec<f64>) -> Result<Self, KernelError> {
        if breaks.is_empty() || breaks.len() != rates.len() {
            return Err(KernelError::InvalidHazard(
                "breaks and rates must be nonempty and of equal length".into(),
            ));
        }
        if breaks[0] != 0.0 {
            return Err(KernelError::InvalidHazard("first break must be 0".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(KernelError::InvalidHazard(
                "breaks must be finite and strictly increasing".into(),
            ));
        }
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(KernelError::InvalidHazard(
                "rates must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { breaks, rates })
    }

    fn piece_len(&self, i: usize) -> f64 {
        match self.breaks.get(i + 1) {
            Some(next) => next - self.breaks[i],
            None => f64::INFINITY,
        }
    }

    /// `mu((0, inf))`, the total integrated hazard.
    pub fn total_hazard(&self) -> f64 {
        let last = self.rates.len() - 1;
        if self.rates[last] > 0.0 {
            return f64::INFINITY;
        }
        (0..last).map(|i| self.rates[i] * self.piece_len(i)).sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut e: f64 = Exp1.sample(rng);
        for (i, &rate) in self.rates.iter().enumerate() {
            let len = self.piece_len(i);
            let budget = rate * len;
            if budget >= e {
                return self.breaks[i] + e / rate;
            }
            e -= budget;
        }
        f64::INFINITY
    }
}

/// Normalized lifespan law `Lambda / b`.
#[derive(Debug, Clone, PartialEq)]
pub enum LifespanLaw {
    /// Exponential lifespans with rate `d`.
    Exponential { d: f64 },
    /// Every lifespan equals `a`, possibly `+inf`.
    Dirac { a: f64 },
    /// Weighted mixture, weights summing to one.
    Mixture(Vec<(f64, LifespanLaw)>),
    /// Uniform law over a sorted sample with values in `(0, +inf]`.
    Empirical(Vec<f64>),
    /// Lifespans with survival `exp(-mu((0, z)))`.
    Hazard(PiecewiseHazard),
    /// `e^{-eta r} base(dr)`, renormalized. Sampled by rejection.
    Tilted { base: Box<LifespanLaw>, eta: f64 },
}

/// `coef * exp(-rate (u - start))` for `u` in `(start, start + len]`, zero
/// elsewhere. Sums of windows describe `P(zeta >= u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub len: f64,
    pub coef: f64,
    pub rate: f64,
}

impl Window {
    fn new(start: f64, len: f64, coef: f64, rate: f64) -> Self {
        Self {
            start,
            len,
            coef,
            rate,
        }
    }

    fn end(&self) -> f64 {
        self.start + self.len
    }

    fn value(&self, u: f64) -> f64 {
        if u > self.start && u <= self.end() {
            self.coef * (-self.rate * (u - self.start)).exp()
        } else {
            0.0
        }
    }
}

/// `int_0^len s^k e^{-c s} ds` for `k = 0, 1, 2`.
pub(crate) fn exp_moments(c: f64, len: f64) -> [f64; 3] {
    if len.is_infinite() {
        if c > 0.0 {
            return [1.0 / c, 1.0 / (c * c), 2.0 / (c * c * c)];
        }
        return [f64::INFINITY; 3];
    }
    if len <= 0.0 {
        return [0.0; 3];
    }
    let x = c * len;
    if x < 1.0 {
        // J_k = len^{k+1} sum_n (-x)^n / (n! (n + k + 1))
        let mut sums = [0.0; 3];
        let mut term = 1.0;
        for n in 0..40 {
            for (k, s) in sums.iter_mut().enumerate() {
                *s += term / (n + k + 1) as f64;
            }
            term *= -x / (n + 1) as f64;
            if term.abs() < 1e-18 {
                break;
            }
        }
        let l2 = len * len;
        [sums[0] * len, sums[1] * l2, sums[2] * l2 * len]
    } else {
        let e = (-x).exp();
        [
            -(-x).exp_m1() / c,
            (1.0 - e * (1.0 + x)) / (c * c),
            (2.0 - e * (2.0 + 2.0 * x + x * x)) / (c * c * c),
        ]
    }
}

impl LifespanLaw {
    /// Draws one lifespan from the law. Only tilted laws can fail.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, KernelError> {
        Ok(match self {
            LifespanLaw::Exponential { d } => Exp::new(*d)
                .map_err(|_| KernelError::NegativeParameter("d"))?
                .sample(rng),
            LifespanLaw::Dirac { a } => *a,
            LifespanLaw::Mixture(components) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, law) in components {
                    acc += w;
                    if u < acc {
                        return law.sample(rng);
                    }
                }
                // weights sum to 1 up to rounding
                return components
                    .last()
                    .expect("mixture is nonempty")
                    .1
                    .sample(rng);
            }
            LifespanLaw::Empirical(sample) => sample[rng.random_range(0..sample.len())],
            LifespanLaw::Hazard(h) => h.sample(rng),
            LifespanLaw::Tilted { base, eta } => {
                for _ in 0..REJECTION_CAP {
                    let z = base.sample(rng)?;
                    if z.is_finite() && rng.random::<f64>() < (-eta * z).exp() {
                        return Ok(z);
                    }
                }
                return Err(KernelError::RejectionExhausted(REJECTION_CAP));
            }
        })
    }

    /// Windows describing `P(zeta >= u)` (unnormalized for tilted laws).
    fn windows(&self) -> Vec<Window> {
        match self {
            LifespanLaw::Exponential { d } => vec![Window::new(0.0, f64::INFINITY, 1.0, *d)],
            LifespanLaw::Dirac { a } => vec![Window::new(0.0, *a, 1.0, 0.0)],
            LifespanLaw::Mixture(components) => components
                .iter()
                .flat_map(|(w, law)| {
                    law.normalized_windows().into_iter().map(move |mut win| {
                        win.coef *= w;
                        win
                    })
                })
                .collect(),
            LifespanLaw::Empirical(sample) => {
                let n = sample.len() as f64;
                let mut out = Vec::new();
                let mut prev = 0.0;
                let mut i = 0;
                while i < sample.len() {
                    let v = sample[i];
                    let remaining = (sample.len() - i) as f64 / n;
                    out.push(Window::new(prev, v - prev, remaining, 0.0));
                    if v.is_infinite() {
                        break;
                    }
                    while i < sample.len() && sample[i] == v {
                        i += 1;
                    }
                    prev = v;
                }
                out
            }
            LifespanLaw::Hazard(h) => {
                let mut out = Vec::new();
                let mut surv = 1.0;
                for (i, &rate) in h.rates.iter().enumerate() {
                    let len = h.piece_len(i);
                    out.push(Window::new(h.breaks[i], len, surv, rate));
                    surv *= (-rate * len).exp();
                }
                out
            }
            LifespanLaw::Tilted { base, eta } => tilt_windows(&base.normalized_windows(), *eta),
        }
    }

    /// Windows of the law, rescaled so that `P(zeta >= 0+) = 1`.
    pub fn normalized_windows(&self) -> Vec<Window> {
        let mut w = self.windows();
        let total = survival_at_zero(&w);
        if total > 0.0 {
            for win in &mut w {
                win.coef /= total;
            }
        }
        w
    }
}

fn survival_at_zero(windows: &[Window]) -> f64 {
    windows
        .iter()
        .filter(|w| w.start == 0.0 && w.len > 0.0)
        .map(|w| w.coef)
        .sum()
}

/// Tail windows of `e^{-eta r} Lambda(dr)` given tail windows of `Lambda`.
///
/// Each window contributes an atom `-coef` at its start (when `start > 0`),
/// a density on its support and an atom at its end; integrating these against
/// `e^{-eta r}` from `u` upwards gives at most three new windows.
fn tilt_windows(windows: &[Window], eta: f64) -> Vec<Window> {
    let mut out = Vec::with_capacity(3 * windows.len());
    for w in windows {
        let g = w.rate + eta;
        let base = w.coef * (-eta * w.start).exp();
        if w.rate > 0.0 {
            out.push(Window::new(w.start, w.len, base * w.rate / g, g));
        }
        let end_decay = if w.len.is_finite() {
            (-g * w.len).exp()
        } else {
            0.0
        };
        if end_decay > 0.0 {
            out.push(Window::new(w.start, w.len, base * eta / g * end_decay, 0.0));
        }
        if w.start > 0.0 {
            out.push(Window::new(
                0.0,
                w.start,
                -base * eta / g * (1.0 - end_decay),
                0.0,
            ));
        }
    }
    out
}

/// A finite lifespan measure `Lambda` on `(0, +inf]`.
#[derive(Debug, Clone)]
pub struct LifespanSpec {
    law: LifespanLaw,
    b: f64,
    q: f64,
    m: f64,
    windows: Arc<[Window]>,
}

impl PartialEq for LifespanSpec {
    fn eq(&self, other: &Self) -> bool {
        self.law == other.law && self.b == other.b
    }
}

impl LifespanSpec {
    /// Builds a spec from a total mass and a normalized law, validating both.
    pub fn new(b: f64, law: LifespanLaw) -> Result<Self, KernelError> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(KernelError::NonPositiveMass(b));
        }
        let law = validate_law(law)?;
        let windows: Arc<[Window]> = law.normalized_windows().into();
        let inf_frac: f64 = windows
            .iter()
            .filter(|w| w.len.is_infinite() && w.rate == 0.0)
            .map(|w| w.coef)
            .sum();
        let q = (b * inf_frac).clamp(0.0, b);
        let m = if q > 0.0 {
            f64::INFINITY
        } else {
            b * laplace_moments(&windows, 0.0)[0]
        };
        Ok(Self {
            law,
            b,
            q,
            m,
            windows,
        })
    }

    pub fn exponential(b: f64, d: f64) -> Result<Self, KernelError> {
        Self::new(b, LifespanLaw::Exponential { d })
    }

    pub fn dirac(b: f64, a: f64) -> Result<Self, KernelError> {
        Self::new(b, LifespanLaw::Dirac { a })
    }

    /// Pure-birth (Yule) measure: all mass at `+inf`.
    pub fn yule(b: f64) -> Result<Self, KernelError> {
        Self::dirac(b, f64::INFINITY)
    }

    pub fn empirical(b: f64, sample: Vec<f64>) -> Result<Self, KernelError> {
        Self::new(b, LifespanLaw::Empirical(sample))
    }

    /// Measure `b mu(dz) exp(-mu((0, z)))` built from a hazard measure `mu`.
    /// A constant hazard gives an exponential law and a zero hazard a Yule
    /// measure.
    pub fn from_hazard(b: f64, hazard: PiecewiseHazard) -> Result<Self, KernelError> {
        let first = hazard.rates[0];
        if hazard.rates.iter().all(|&r| r == first) {
            if first == 0.0 {
                return Self::yule(b);
            }
            return Self::exponential(b, first);
        }
        Self::new(b, LifespanLaw::Hazard(hazard))
    }

    pub fn law(&self) -> &LifespanLaw {
        &self.law
    }

    /// Total mass `Lambda((0, inf])`, the birth rate.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Mass at `+inf`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `int r Lambda(dr)`, the mean offspring number per individual.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// `int r^2 Lambda(dr)`.
    pub fn second_moment(&self) -> f64 {
        if self.q > 0.0 {
            return f64::INFINITY;
        }
        2.0 * self.b * laplace_moments(&self.windows, 0.0)[1]
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// `Lambda([r, inf])`.
    pub fn tail(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.b;
        }
        self.b * self.windows.iter().map(|w| w.value(r)).sum::<f64>()
    }

    /// Draws a lifespan from `Lambda / b`.
    pub fn sample_lifespan<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, KernelError> {
        self.law.sample(rng)
    }

    /// `int_lo^hi Lambda([u, inf]) du` and `int_lo^hi (u - lo) Lambda([u, inf]) du`.
    pub fn tail_cell_integrals(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (mut i0, mut i1) = (0.0, 0.0);
        for w in self.windows.iter() {
            let s0 = lo.max(w.start);
            let s1 = hi.min(w.end());
            if s1 <= s0 {
                continue;
            }
            let f = w.coef * (-w.rate * (s0 - w.start)).exp();
            let [j0, j1, _] = exp_moments(w.rate, s1 - s0);
            i0 += f * j0;
            i1 += f * ((s0 - lo) * j0 + j1);
        }
        (self.b * i0, self.b * i1)
    }

    /// `int_0^inf u^k e^{-lambda u} Lambda([u, inf]) du` for `k = 0, 1, 2`.
    pub fn tail_laplace_moments(&self, lambda: f64) -> [f64; 3] {
        let l = laplace_moments(&self.windows, lambda);
        [self.b * l[0], self.b * l[1], self.b * l[2]]
    }
}

fn laplace_moments(windows: &[Window], lambda: f64) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for w in windows {
        let c = lambda + w.rate;
        let [j0, j1, j2] = exp_moments(c, w.len);
        let f = w.coef * (-lambda * w.start).exp();
        let s = w.start;
        acc[0] += f * j0;
        acc[1] += f * (s * j0 + j1);
        acc[2] += f * (s * s * j0 + 2.0 * s * j1 + j2);
    }
    acc
}

fn validate_law(law: LifespanLaw) -> Result<LifespanLaw, KernelError> {
    Ok(match law {
        LifespanLaw::Exponential { d } => {
            if !(d > 0.0) || !d.is_finite() {
                return Err(KernelError::NegativeParameter("d"));
            }
            LifespanLaw::Exponential { d }
        }
        LifespanLaw::Dirac { a } => {
            if !(a > 0.0) {
                return Err(KernelError::NegativeParameter("a"));
            }
            LifespanLaw::Dirac { a }
        }
        LifespanLaw::Mixture(components) => {
            if components.is_empty() {
                return Err(KernelError::EmptyMixture);
            }
            if components.iter().any(|(w, _)| !(*w >= 0.0)) {
                return Err(KernelError::NegativeParameter("weight"));
            }
            let total: f64 = components.iter().map(|(w, _)| w).sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(KernelError::WeightsNotNormalized(total));
            }
            LifespanLaw::Mixture(
                components
                    .into_iter()
                    .map(|(w, l)| validate_law(l).map(|l| (w, l)))
                    .collect::<Result<_, _>>()?,
            )
        }
        LifespanLaw::Empirical(mut sample) => {
            if sample.is_empty() {
                return Err(KernelError::EmptySample);
            }
            if sample.iter().any(|v| !(*v > 0.0)) {
                return Err(KernelError::NegativeParameter("sample value"));
            }
            sample.sort_by(f64::total_cmp);
            LifespanLaw::Empirical(sample)
        }
        LifespanLaw::Hazard(h) => LifespanLaw::Hazard(PiecewiseHazard::new(h.breaks, h.rates)?),
        LifespanLaw::Tilted { base, eta } => {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(KernelError::NegativeParameter("eta"));
            }
            LifespanLaw::Tilted {
                base: Box::new(validate_law(*base)?),
                eta,
            }
        }
    })
}
