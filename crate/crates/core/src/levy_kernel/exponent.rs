//! Laplace exponent `psi(lambda) = lambda - F(lambda)` of the contour's
//! underlying Lévy process, its largest root and right inverse.

use super::measure::{LifespanLaw, LifespanSpec, PiecewiseHazard};
use super::scale::{ScaleFunction, ScaleTable};
use super::KernelError;

/// Absolute tolerance on `psi` at computed roots.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Relative slack under which `m` is treated as exactly one.
const CRITICAL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// A lifespan measure together with its Malthusian root.
#[derive(Debug, Clone)]
pub struct PsiModel {
    spec: LifespanSpec,
    eta: f64,
    criticality: Criticality,
}

impl PsiModel {
    pub fn new(spec: LifespanSpec) -> Self {
        let criticality = criticality_of(&spec);
        let eta = match criticality {
            Criticality::Supercritical => largest_root(&spec),
            _ => 0.0,
        };
        Self {
            spec,
            eta,
            criticality,
        }
    }

    pub fn spec(&self) -> &LifespanSpec {
        &self.spec
    }

    /// Largest root of `psi`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn criticality(&self) -> Criticality {
        self.criticality
    }

    /// `F(lambda) = int (1 - e^{-lambda r}) Lambda(dr)`.
    pub fn f(&self, lambda: f64) -> Result<f64, KernelError> {
        check_lambda(lambda)?;
        Ok(branching_mechanism(&self.spec, lambda))
    }

    pub fn psi(&self, lambda: f64) -> Result<f64, KernelError> {
        check_lambda(lambda)?;
        Ok(psi_of(&self.spec, lambda))
    }

    /// `psi'(lambda)`; at `0` this is `1 - m`.
    pub fn psi_prime(&self, lambda: f64) -> Result<f64, KernelError> {
        check_lambda(lambda)?;
        Ok(psi_prime_of(&self.spec, lambda))
    }

    /// `psi''(lambda) = int r^2 e^{-lambda r} Lambda(dr)`.
    pub fn psi_second(&self, lambda: f64) -> Result<f64, KernelError> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Ok(self.spec.second_moment());
        }
        let [_, l1, l2] = self.spec.tail_laplace_moments(lambda);
        Ok(2.0 * l1 - lambda * l2)
    }

    /// The unique `lambda >= eta` with `psi(lambda) = value`.
    pub fn phi_inverse(&self, value: f64) -> Result<f64, KernelError> {
        if !(value >= 0.0) {
            return Err(KernelError::NegativeArgument(value));
        }
        if value == 0.0 {
            return Ok(self.eta);
        }
        // psi(lambda) >= lambda - b, so the root lies below value + b.
        Ok(solve_increasing(
            &self.spec,
            self.eta,
            value + self.spec.b(),
            value,
        ))
    }

    /// Generating function of the total offspring number of one individual,
    /// `f(s) = E exp(-b zeta (1 - s))`.
    pub fn offspring_gf(&self, s: f64) -> Result<f64, KernelError> {
        if self.spec.q() > 0.0 {
            return Err(KernelError::InfiniteOffspring);
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(KernelError::OutOfUnitInterval(s));
        }
        let b = self.spec.b();
        Ok(1.0 - branching_mechanism(&self.spec, b * (1.0 - s)) / b)
    }

    /// Mean of the offspring distribution.
    pub fn offspring_mean(&self) -> f64 {
        self.spec.m()
    }

    /// Measure `e^{-eta r} Lambda(dr)`: the law of the tree conditioned on
    /// extinction.
    pub fn conditioned_spec(&self) -> Result<LifespanSpec, KernelError> {
        if self.criticality != Criticality::Supercritical {
            return Err(KernelError::NotSupercritical);
        }
        let eta = self.eta;
        let (mass, law) = tilt_law(self.spec.law(), eta);
        let b = self.spec.b() * mass;
        if !(b > 0.0) {
            return Err(KernelError::ExtinctionImpossible);
        }
        LifespanSpec::new(b, law)
    }

    /// Closed-form scale function, when the family has one.
    pub fn closed_form_scale(&self) -> Option<ClosedFormScale> {
        let b = self.spec.b();
        match self.spec.law() {
            LifespanLaw::Dirac { a } if a.is_infinite() => Some(ClosedFormScale::Yule { b }),
            LifespanLaw::Exponential { d } => Some(ClosedFormScale::BirthDeath { b, d: *d }),
            _ => None,
        }
    }

    /// Tabulates `W` on `[0, x_max]`; see [`ScaleTable::solve`].
    pub fn scale_table(&self, x_max: f64, h: f64) -> Result<ScaleTable, KernelError> {
        ScaleTable::solve(&self.spec, x_max, h)
    }
}

/// Closed forms of `W` for the Markovian families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormScale {
    /// `W(x) = e^{bx}`.
    Yule { b: f64 },
    /// `W(x) = 1 + b (e^{(b-d)x} - 1)/(b - d)`, and `1 + bx` when `b = d`.
    BirthDeath { b: f64, d: f64 },
}

impl ScaleFunction for ClosedFormScale {
    fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            ClosedFormScale::Yule { b } => (b * x).exp(),
            ClosedFormScale::BirthDeath { b, d } => {
                let delta = b - d;
                if delta == 0.0 {
                    1.0 + b * x
                } else {
                    1.0 + b * (delta * x).exp_m1() / delta
                }
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<(), KernelError> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(KernelError::NegativeArgument(lambda))
    }
}

fn criticality_of(spec: &LifespanSpec) -> Criticality {
    if spec.q() > 0.0 {
        return Criticality::Supercritical;
    }
    let m = spec.m();
    if (m - 1.0).abs() <= CRITICAL_SLACK {
        Criticality::Critical
    } else if m > 1.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    }
}

pub(crate) fn branching_mechanism(spec: &LifespanSpec, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return spec.q();
    }
    // int_0^inf e^{-lambda u} Lambda([u, inf]) du = F(lambda) / lambda
    lambda * spec.tail_laplace_moments(lambda)[0]
}

fn psi_of(spec: &LifespanSpec, lambda: f64) -> f64 {
    lambda - branching_mechanism(spec, lambda)
}

fn psi_prime_of(spec: &LifespanSpec, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0 - spec.m();
    }
    let [l0, l1, _] = spec.tail_laplace_moments(lambda);
    1.0 - (l0 - lambda * l1)
}

fn largest_root(spec: &LifespanSpec) -> f64 {
    solve_increasing(spec, 0.0, spec.b(), 0.0)
}

/// Solves `psi(lambda) = target` on `[lo, hi]` where `psi - target` is
/// nonpositive at `lo`, nonnegative at `hi` and increasing in between.
fn solve_increasing(spec: &LifespanSpec, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    let g = |x: f64| psi_of(spec, x) - target;
    if g(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo), g(hi));
    let mut x = if glo.abs() <= ghi.abs() { lo } else { hi };
    // Newton polish; keep only strict improvements.
    for _ in 0..4 {
        let gx = g(x);
        let slope = psi_prime_of(spec, x.max(f64::MIN_POSITIVE));
        if gx == 0.0 || slope <= 0.0 {
            break;
        }
        let next = x - gx / slope;
        if next.is_finite() && g(next).abs() < gx.abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// Tilts a normalized law by `e^{-eta r}`, returning the retained mass
/// fraction and the renormalized law.
fn tilt_law(law: &LifespanLaw, eta: f64) -> (f64, LifespanLaw) {
    match law {
        LifespanLaw::Exponential { d } => (d / (d + eta), LifespanLaw::Exponential { d: d + eta }),
        LifespanLaw::Dirac { a } => ((-eta * a).exp(), LifespanLaw::Dirac { a: *a }),
        LifespanLaw::Empirical(sample) => {
            let n = sample.len() as f64;
            let weights: Vec<f64> = sample.iter().map(|v| (-eta * v).exp() / n).collect();
            let mass: f64 = weights.iter().sum();
            let components = sample
                .iter()
                .zip(&weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(v, w)| (w / mass, LifespanLaw::Dirac { a: *v }))
                .collect();
            (mass, renormalized_mixture(components))
        }
        LifespanLaw::Mixture(components) => {
            let tilted: Vec<(f64, LifespanLaw)> = components
                .iter()
                .map(|(w, l)| {
                    let (m, t) = tilt_law(l, eta);
                    (w * m, t)
                })
                .filter(|(w, _)| *w > 0.0)
                .collect();
            let mass: f64 = tilted.iter().map(|(w, _)| w).sum();
            let components = tilted.into_iter().map(|(w, l)| (w / mass, l)).collect();
            (mass, renormalized_mixture(components))
        }
        LifespanLaw::Hazard(_) | LifespanLaw::Tilted { .. } => {
            let (base, eta) = match law {
                LifespanLaw::Tilted { base, eta: e0 } => (base.as_ref().clone(), e0 + eta),
                other => (other.clone(), eta),
            };
            let tilted = LifespanLaw::Tilted {
                base: Box::new(base),
                eta,
            };
            let mass = tilted_mass(law, eta);
            (mass, tilted)
        }
    }
}

fn tilted_mass(law: &LifespanLaw, eta: f64) -> f64 {
    // E e^{-eta zeta} = 1 - eta int e^{-eta u} P(zeta >= u) du
    let spec = LifespanSpec::new(1.0, law.clone()).expect("validated law");
    1.0 - branching_mechanism(&spec, eta)
}

/// Mixture weights after filtering can drift from one by rounding.
fn renormalized_mixture(mut components: Vec<(f64, LifespanLaw)>) -> LifespanLaw {
    if components.len() == 1 {
        return components.pop().expect("one component").1;
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    for (w, _) in &mut components {
        *w /= total;
    }
    LifespanLaw::Mixture(components)
}

/// Piecewise hazard helper used by configuration loading.
pub fn hazard_spec(b: f64, breaks: Vec<f64>, rates: Vec<f64>) -> Result<LifespanSpec, KernelError> {
    LifespanSpec::from_hazard(b, PiecewiseHazard::new(breaks, rates)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_model(b: f64, d: f64) -> PsiModel {
        PsiModel::new(LifespanSpec::exponential(b, d).unwrap())
    }

    #[test]
    fn f_examples() {
        let m = exp_model(1.2, 1.0);
        assert!((m.f(1.0).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(m.f(0.0).unwrap(), 0.0);
        let dirac = PsiModel::new(LifespanSpec::dirac(1.0, 2.0).unwrap());
        assert!((dirac.f(1.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        let yule = PsiModel::new(LifespanSpec::yule(0.7).unwrap());
        assert_eq!(yule.f(0.0).unwrap(), 0.7);
        assert!(m.f(-1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let yule = PsiModel::new(LifespanSpec::yule(0.7).unwrap());
        for l in [0.0, 0.3, 1.0, 5.0] {
            assert!((yule.psi(l).unwrap() - (l - 0.7)).abs() < 1e-14);
        }
        let (b, d) = (1.2, 1.0);
        let m = exp_model(b, d);
        for l in [0.1, 0.5, 2.0, 9.0] {
            let closed = l - b * l / (d + l);
            assert!((m.psi(l).unwrap() - closed).abs() < 1e-14);
        }
        assert!(m.psi(m.eta()).unwrap().abs() <= ROOT_TOLERANCE);
    }

    #[test]
    fn eta_examples() {
        let m = exp_model(1.2, 1.0);
        assert_eq!(m.criticality(), Criticality::Supercritical);
        assert!((m.eta() - 0.2).abs() < 1e-12);
        let sub = exp_model(0.8, 1.0);
        assert_eq!(sub.criticality(), Criticality::Subcritical);
        assert_eq!(sub.eta(), 0.0);
        let crit = exp_model(1.0, 1.0);
        assert_eq!(crit.criticality(), Criticality::Critical);
        let yule = PsiModel::new(LifespanSpec::yule(0.7).unwrap());
        assert!((yule.eta() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn phi_inverse_examples() {
        let m = exp_model(1.2, 1.0);
        assert_eq!(m.phi_inverse(0.0).unwrap(), m.eta());
        let yule = PsiModel::new(LifespanSpec::yule(0.7).unwrap());
        assert!((yule.phi_inverse(2.0).unwrap() - 2.7).abs() < 1e-12);

        // independent bisection on the closed-form exponent
        let psi = |l: f64| l - 1.2 * l / (1.0 + l);
        let (mut lo, mut hi) = (0.2, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) < 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((m.phi_inverse(0.5).unwrap() - lo).abs() < 1e-10);
        assert!(m.phi_inverse(-0.1).is_err());
    }

    #[test]
    fn psi_derivatives_match_finite_differences() {
        let m = exp_model(1.2, 1.0);
        let h = 1e-5;
        for l in [0.3, 1.0, 4.0] {
            let fd1 = (m.psi(l + h).unwrap() - m.psi(l - h).unwrap()) / (2.0 * h);
            assert!((m.psi_prime(l).unwrap() - fd1).abs() < 1e-8);
            let fd2 = (m.psi_prime(l + h).unwrap() - m.psi_prime(l - h).unwrap()) / (2.0 * h);
            assert!((m.psi_second(l).unwrap() - fd2).abs() < 1e-7);
        }
        // psi'(eta) = 1 - d/b
        assert!((m.psi_prime(m.eta()).unwrap() - (1.0 - 1.0 / 1.2)).abs() < 1e-11);
        // critical exponential: psi''(0+) = 2b/d^2
        let c = exp_model(1.0, 1.0);
        assert!((c.psi_second(0.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn conditioned_exponential() {
        let m = exp_model(1.2, 1.0);
        let c = m.conditioned_spec().unwrap();
        assert!((c.b() - 1.0).abs() < 1e-12);
        match c.law() {
            LifespanLaw::Exponential { d } => assert!((d - 1.2).abs() < 1e-12),
            other => panic!("unexpected law {other:?}"),
        }
        // b - eta
        assert!((c.b() - (1.2 - m.eta())).abs() < 1e-12);
        let cm = PsiModel::new(c);
        assert_eq!(cm.criticality(), Criticality::Subcritical);
        assert!(cm.psi_prime(0.0).unwrap() > 0.0);
        assert!(exp_model(0.8, 1.0).conditioned_spec().is_err());
        let yule = PsiModel::new(LifespanSpec::yule(0.7).unwrap());
        assert!(matches!(
            yule.conditioned_spec(),
            Err(KernelError::ExtinctionImpossible)
        ));
    }

    #[test]
    fn conditioned_mass_is_b_minus_eta_for_other_families() {
        let specs = [
            LifespanSpec::dirac(2.0, 1.0).unwrap(),
            LifespanSpec::empirical(3.0, vec![0.2, 0.9, 1.7, f64::INFINITY]).unwrap(),
            hazard_spec(2.5, vec![0.0, 0.5, 2.0], vec![0.1, 1.0, 0.4]).unwrap(),
            LifespanSpec::new(
                2.0,
                LifespanLaw::Mixture(vec![
                    (0.3, LifespanLaw::Exponential { d: 0.5 }),
                    (0.7, LifespanLaw::Dirac { a: 1.5 }),
                ]),
            )
            .unwrap(),
        ];
        for s in specs {
            let m = PsiModel::new(s);
            assert_eq!(m.criticality(), Criticality::Supercritical);
            let c = m.conditioned_spec().unwrap();
            assert!(
                (c.b() - (m.spec().b() - m.eta())).abs() < 1e-10,
                "{:?}",
                m.spec().law()
            );
            let cm = PsiModel::new(c.clone());
            // psi_nat(lambda) = psi(lambda + eta)
            for l in [0.1, 0.7, 3.0] {
                let lhs = cm.psi(l).unwrap();
                let rhs = m.psi(l + m.eta()).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn offspring_gf_examples() {
        let m = exp_model(1.2, 1.0);
        assert!((m.offspring_gf(1.0).unwrap() - 1.0).abs() < 1e-15);
        for s in [0.0, 0.3, 0.9] {
            let closed = 1.0 / (1.0 + 1.2 * (1.0 - s));
            assert!((m.offspring_gf(s).unwrap() - closed).abs() < 1e-14);
        }
        let dirac = PsiModel::new(LifespanSpec::dirac(0.5, 3.0).unwrap());
        assert!((dirac.offspring_gf(0.0).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
        let yule = PsiModel::new(LifespanSpec::yule(1.0).unwrap());
        assert!(matches!(
            yule.offspring_gf(0.5),
            Err(KernelError::InfiniteOffspring)
        ));
        // numeric derivative at 1 gives the mean
        let h = 1e-6;
        let deriv = (m.offspring_gf(1.0).unwrap() - m.offspring_gf(1.0 - h).unwrap()) / h;
        assert!((deriv - m.offspring_mean()).abs() < 1e-5);
    }
}
