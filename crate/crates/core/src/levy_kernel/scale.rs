//! Scale function `W` of the contour process.
//!
//! `W` solves the renewal equation `W(x) = 1 + int_0^x Lambda([x-y, inf]) W(y) dy`,
//! whose Laplace transform is `1/psi`. It is discretized with trapezoidal
//! product quadrature: `W` is piecewise linear on the grid and the kernel is
//! integrated exactly on each cell, so step kernels (atoms of `Lambda`) need
//! no special handling. The solve runs at `h` and `h/2` and the two tables are
//! combined by one Richardson step.

use std::io::{self, Write};

use super::measure::LifespanSpec;
use super::KernelError;

/// Largest `h * b` accepted by the solver.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Anything that can evaluate a scale function.
pub trait ScaleFunction {
    fn w(&self, x: f64) -> f64;
}

impl<T: ScaleFunction + ?Sized> ScaleFunction for &T {
    fn w(&self, x: f64) -> f64 {
        (**self).w(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTable {
    h: f64,
    values: Vec<f64>,
}

impl ScaleTable {
    pub fn solve(spec: &LifespanSpec, x_max: f64, h: f64) -> Result<Self, KernelError> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(KernelError::InvalidGrid(format!("x_max = {x_max}")));
        }
        if !(h > 0.0) || h > x_max / 10.0 {
            return Err(KernelError::InvalidGrid(format!(
                "step {h} must lie in (0, x_max/10]"
            )));
        }
        if h * spec.b() >= STABILITY_LIMIT {
            return Err(KernelError::UnstableStep {
                h,
                b: spec.b(),
                limit: STABILITY_LIMIT,
            });
        }
        let n = (x_max / h).round() as usize;
        let coarse = solve_grid(spec, h, n);
        let fine = solve_grid(spec, h / 2.0, 2 * n);
        let mut values: Vec<f64> = coarse
            .iter()
            .enumerate()
            .map(|(k, &c)| (4.0 * fine[2 * k] - c) / 3.0)
            .collect();
        // W is increasing; once it saturates (subcritical) the extrapolation
        // wobbles by a few ulps, which is clamped away here.
        for k in 1..values.len() {
            values[k] = values[k].max(values[k - 1]);
        }
        Ok(Self { h, values })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn x_max(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    /// Grid values; `values()[k]` is `W(k h)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k as f64 * self.h, v))
    }

    /// `W(x)` by linear interpolation, `None` outside `[0, x_max]` (and `0`
    /// for negative `x`, following the usual convention).
    pub fn try_w(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return Some(0.0);
        }
        let pos = x / self.h;
        let k = pos.floor() as usize;
        if k + 1 >= self.values.len() {
            let last = self.values.len() - 1;
            return (pos <= last as f64 + 1e-9).then(|| self.values[last]);
        }
        let frac = pos - k as f64;
        Some(self.values[k] + frac * (self.values[k + 1] - self.values[k]))
    }

    /// CSV with columns `x, W` and optionally a reference column and the
    /// maximum absolute deviation from it.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        header: &str,
        reference: Option<&dyn ScaleFunction>,
    ) -> io::Result<Option<f64>> {
        writeln!(out, "# schema=1 {header}")?;
        let mut max_dev: Option<f64> = None;
        match reference {
            Some(r) => {
                writeln!(out, "x,W,W_closed")?;
                for (x, w) in self.grid() {
                    let c = r.w(x);
                    let dev = (w - c).abs();
                    max_dev = Some(max_dev.map_or(dev, |m: f64| m.max(dev)));
                    writeln!(out, "{x:.16e},{w:.16e},{c:.16e}")?;
                }
                writeln!(out, "# max_abs_deviation={:.16e}", max_dev.unwrap_or(0.0))?;
            }
            None => {
                writeln!(out, "x,W")?;
                for (x, w) in self.grid() {
                    writeln!(out, "{x:.16e},{w:.16e}")?;
                }
            }
        }
        Ok(max_dev)
    }
}

impl ScaleFunction for ScaleTable {
    fn w(&self, x: f64) -> f64 {
        self.try_w(x).unwrap_or(f64::NAN)
    }
}

fn solve_grid(spec: &LifespanSpec, h: f64, n: usize) -> Vec<f64> {
    // For the cell u in [kh, (k+1)h]: a[k] = int barL, b[k] = int (u-kh)/h barL.
    let mut a = Vec::with_capacity(n);
    let mut bb = Vec::with_capacity(n);
    for k in 0..n {
        let lo = k as f64 * h;
        let (i0, i1) = spec.tail_cell_integrals(lo, lo + h);
        a.push(i0);
        bb.push(i1 / h);
    }
    // Node i of the history receives weight d[n - i] from the two adjacent cells.
    let c: Vec<f64> = a.iter().zip(&bb).map(|(x, y)| x - y).collect();
    let mut d = vec![0.0; n + 1];
    for m in 1..n {
        d[m] = c[m] + bb[m - 1];
    }
    let diag = 1.0 - c[0];

    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for step in 1..=n {
        let mut acc = 1.0 + w[0] * bb[step - 1];
        for i in 1..step {
            acc += w[i] * d[step - i];
        }
        w.push(acc / diag);
    }
    w
}
