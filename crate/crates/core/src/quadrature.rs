//! Composite trapezoid rules with step-doubling convergence checks.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::series::TimeGrid;

/// Values a trapezoid rule can accumulate.
pub trait Integrand: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for num_complex::Complex64 {
    fn zero() -> Self {
        num_complex::Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Trapezoid estimate of `f` on `[a, b]` with `n` equal panels.
pub fn trapezoid<T: Integrand>(f: impl Fn(f64) -> T, a: f64, b: f64, n: usize) -> T {
    let h = (b - a) / n as f64;
    let mut acc = (f(a) + f(b)) * 0.5;
    for k in 1..n {
        acc = acc + f(a + k as f64 * h);
    }
    acc * h
}

/// Estimate after a doubling pass: the running panel count and the last two estimates.
#[derive(Debug, Clone, Copy)]
pub struct Refined<T> {
    pub value: T,
    pub previous: T,
    pub panels: usize,
    /// Trapezoid estimate of the integral of `|f|`, same resolution as `value`.
    pub l1: f64,
}

/// Doubles the panel count starting from `initial` until two successive
/// estimates differ by at most `atol + rtol * l1`, or `max_panels` is reached.
///
/// Returns the last pair of estimates either way; callers decide whether the
/// final change is acceptable.
pub fn trapezoid_doubling<T: Integrand>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    initial: usize,
    max_panels: usize,
    rtol: f64,
    atol: f64,
) -> Refined<T> {
    let mut n = initial.max(1);
    let h0 = (b - a) / n as f64;
    let fa = f(a);
    let fb = f(b);
    let mut sum = (fa + fb) * 0.5;
    let mut l1_sum = 0.5 * (fa.magnitude() + fb.magnitude());
    for k in 1..n {
        let v = f(a + k as f64 * h0);
        sum = sum + v;
        l1_sum += v.magnitude();
    }
    let mut value = sum * h0;
    let mut l1 = l1_sum * h0;
    loop {
        let h = (b - a) / (2 * n) as f64;
        for k in 0..n {
            let v = f(a + (2 * k + 1) as f64 * h);
            sum = sum + v;
            l1_sum += v.magnitude();
        }
        let previous = value;
        value = sum * h;
        l1 = l1.max(l1_sum * h);
        n *= 2;
        let change = (value + previous * -1.0).magnitude();
        if change <= atol + rtol * l1 || n >= max_panels {
            return Refined {
                value,
                previous,
                panels: n,
                l1,
            };
        }
    }
}

/// Running integral `F(t_k) = \int_0^{t_k} f` on a grid starting at `t_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeIntegral {
    pub values: Vec<f64>,
    /// Running integral of `|f|`, the scale the convergence test is measured against.
    pub l1: Vec<f64>,
    /// Largest `|F_fine - F_coarse| / l1` over all samples.
    pub max_refinement_change: f64,
}

pub const MAX_PANELS_PER_INTERVAL: usize = 1 << 20;

/// Cumulative composite trapezoid with per-interval step halving.
///
/// Each grid interval is subdivided until halving the sub-step changes its
/// contribution by less than `rtol` of the interval's `L1` mass, so the
/// running integral moves by less than `rtol` relative when the step is halved.
pub fn cumulative_trapezoid(f: impl Fn(f64) -> f64, grid: &TimeGrid, rtol: f64) -> Result<CumulativeIntegral> {
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut l1 = Vec::with_capacity(n);
    values.push(0.0);
    l1.push(0.0);
    let (mut acc, mut acc_l1, mut acc_change) = (0.0, 0.0, 0.0f64);
    let mut worst = 0.0f64;
    for k in 0..n - 1 {
        let (a, b) = (grid.at(k), grid.at(k + 1));
        let r = trapezoid_doubling(&f, a, b, 2, MAX_PANELS_PER_INTERVAL, rtol, f64::MIN_POSITIVE);
        let change = r.value - r.previous;
        if change.abs() > rtol * r.l1 + f64::MIN_POSITIVE {
            return Err(Error::QuadratureNotConverged {
                t0: a,
                t1: b,
                change: change.abs(),
            });
        }
        acc += r.value;
        acc_l1 += r.l1;
        acc_change += change;
        if acc_l1 > 0.0 {
            worst = worst.max(acc_change.abs() / acc_l1);
        }
        values.push(acc);
        l1.push(acc_l1);
    }
    Ok(CumulativeIntegral {
        values,
        l1,
        max_refinement_change: worst,
    })
}
