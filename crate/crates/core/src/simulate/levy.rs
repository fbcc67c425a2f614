//! Direct simulation of the Lévy process with drift `-1` and jump measure
//! `Lambda`, and of the Jirina process of generation lengths.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use super::SimError;
use crate::contour::{ContourPath, Jump};
use crate::levy_kernel::{KernelError, LifespanSpec};

fn gap(spec: &LifespanSpec) -> Result<Exp<f64>, SimError> {
    Exp::new(spec.b()).map_err(|_| SimError::Kernel(KernelError::NonPositiveMass(spec.b())))
}

/// The process started at `min(chi, tau)`, reflected below `tau` (a jump
/// crossing `tau` is clipped to end at `tau`) and killed at `0`. Event
/// driven, no discretization; jump times follow the same prefix-sum rule
/// as tree contours.
pub fn sample_levy_reflected<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    tau: f64,
    rng: &mut R,
) -> Result<ContourPath, SimError> {
    if !(chi > 0.0) {
        return Err(SimError::NonPositive { name: "chi", value: chi });
    }
    if !(tau > 0.0) {
        return Err(SimError::NonPositive { name: "tau", value: tau });
    }
    if !tau.is_finite() {
        return Err(SimError::Infinite("tau"));
    }
    let gap = gap(spec)?;
    let start = chi.min(tau);
    let mut acc = start;
    let mut x = start;
    let mut jumps = Vec::new();
    loop {
        let level = x - gap.sample(rng);
        if level <= 0.0 {
            break;
        }
        let time = acc - level;
        let before = acc - time;
        if before <= 0.0 || jumps.last().is_some_and(|j: &Jump| time <= j.time) {
            // rounding put the jump on the kill time; treat as killed
            break;
        }
        // sizes are float differences of death and birth levels, exactly as
        // in a sampled tree, so every path is the contour of a float tree
        let omega = (level + spec.sample_lifespan(rng)?).min(tau);
        let size = omega - level;
        if !(size > 0.0) {
            x = level;
            continue;
        }
        jumps.push(Jump { time, size });
        acc += size;
        x = acc - time;
    }
    Ok(ContourPath::new(start, jumps).expect("simulated path is valid"))
}

/// `(undershoot, overshoot)` of the first passage above `0` of the process
/// started at `0`, or `None` if it reaches `-tau_cond` first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overshoot {
    pub undershoot: f64,
    pub overshoot: f64,
}

pub fn sample_overshoot<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    tau_cond: f64,
    rng: &mut R,
) -> Result<Option<Overshoot>, SimError> {
    if !(tau_cond > 0.0) {
        return Err(SimError::NonPositive { name: "tau_cond", value: tau_cond });
    }
    let gap = gap(spec)?;
    let mut x = 0.0;
    loop {
        x -= gap.sample(rng);
        if x <= -tau_cond {
            return Ok(None);
        }
        let r = spec.sample_lifespan(rng)?;
        if x + r > 0.0 {
            return Ok(Some(Overshoot {
                undershoot: -x,
                overshoot: x + r,
            }));
        }
        x += r;
    }
}

/// Sum of the lifespans born on a stretch of total length `z`: a Poisson
/// number (mean `b z`) of i.i.d. draws from `Lambda / b`.
pub fn sample_subordinator_value<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    z: f64,
    rng: &mut R,
) -> Result<f64, SimError> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(SimError::NonPositive { name: "z", value: z });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let n = Poisson::new(spec.b() * z)
        .map_err(|_| SimError::NonPositive { name: "b z", value: spec.b() * z })?
        .sample(rng) as u64;
    let mut total = 0.0;
    for _ in 0..n {
        total += spec.sample_lifespan(rng)?;
    }
    Ok(total)
}

/// `Z_0 = chi, Z_1, ..., Z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JirinaTrace(pub Vec<f64>);

impl JirinaTrace {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_extinct(&self) -> bool {
        self.0.last() == Some(&0.0)
    }
}

pub fn jirina_trace<R: Rng + ?Sized>(
    spec: &LifespanSpec,
    chi: f64,
    n_gen: usize,
    rng: &mut R,
) -> Result<JirinaTrace, SimError> {
    let mut z = vec![chi];
    for _ in 0..n_gen {
        let last = *z.last().expect("nonempty");
        let next = if last.is_infinite() {
            f64::INFINITY
        } else {
            sample_subordinator_value(spec, last, rng)?
        };
        z.push(next);
    }
    Ok(JirinaTrace(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_kernel::PsiModel;
    use crate::simulate::RngStream;

    #[test]
    fn reflected_path_stays_below_barrier() {
        let spec = LifespanSpec::exponential(1.2, 1.0).unwrap();
        for i in 0..200 {
            let p = sample_levy_reflected(&spec, 1.0, 3.0, &mut RngStream::new(4, i).rng()).unwrap();
            for (_, _, top) in p.segments() {
                assert!(top <= 3.0 + 1e-12);
            }
            let total: f64 = p.start_level() + p.jumps().iter().map(|j| j.size).sum::<f64>();
            assert!((p.kill_time() - total).abs() < 1e-9);
        }
        let p = sample_levy_reflected(&spec, 5.0, 3.0, &mut RngStream::new(4, 0).rng()).unwrap();
        assert_eq!(p.start_level(), 3.0);
        assert!(sample_levy_reflected(&spec, 0.0, 3.0, &mut RngStream::new(4, 0).rng()).is_err());
    }

    #[test]
    fn overshoot_is_positive() {
        let spec = LifespanSpec::exponential(0.8, 1.0).unwrap();
        let mut rng = RngStream::new(8, 0).rng();
        for _ in 0..2000 {
            if let Some(o) = sample_overshoot(&spec, 2.0, &mut rng).unwrap() {
                assert!(o.undershoot > 0.0 && o.undershoot < 2.0 && o.overshoot > 0.0);
            }
        }
    }

    #[test]
    fn subordinator_mean_and_laplace() {
        let spec = LifespanSpec::dirac(1.5, 0.7).unwrap();
        let model = PsiModel::new(spec.clone());
        let mut rng = RngStream::new(12, 0).rng();
        assert_eq!(sample_subordinator_value(&spec, 0.0, &mut rng).unwrap(), 0.0);
        let n = 40_000;
        let z = 2.0;
        let xs: Vec<f64> = (0..n).map(|_| sample_subordinator_value(&spec, z, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - spec.m() * z).abs() < 4.0 * (var / n as f64).sqrt());
        let lambda = 1.0;
        let lt: Vec<f64> = xs.iter().map(|x| (-lambda * x).exp()).collect();
        let m = lt.iter().sum::<f64>() / n as f64;
        let sd = (lt.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        let expected = (-z * model.f(lambda).unwrap()).exp();
        assert!((m - expected).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn jirina_traces() {
        let spec = LifespanSpec::exponential(0.9, 1.0).unwrap();
        let mut rng = RngStream::new(13, 0).rng();
        let t = jirina_trace(&spec, 0.0, 5, &mut rng).unwrap();
        assert!(t.values().iter().all(|&z| z == 0.0));
        let n = 20_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let t = jirina_trace(&spec, 1.0, 3, &mut rng).unwrap();
            let v = t.values();
            assert!(v.windows(2).all(|w| w[0] != 0.0 || w[1] == 0.0));
            sum += v[3];
            sq += v[3] * v[3];
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64 - mean * mean).sqrt();
        assert!((mean - 0.9f64.powi(3)).abs() < 4.0 * sd / (n as f64).sqrt());
    }
}
