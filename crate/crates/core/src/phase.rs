//! Variance-covariance matrices of the one-dimensional quantum phase space.
//!
//! A pointer state is labelled by a [`PhasePoint`] `(<p>, <x>)` and shares a
//! [`CovarianceMatrix`] `G = [[P, Q], [Q, X]]` with every other point of the
//! same phase space. Admissible matrices obey `det G >= hbar^2 / 4`; pointer
//! states saturate it.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::series::central_differences;

/// Relative tolerance used to decide `det G == hbar^2 / 4`.
pub const SATURATION_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    /// Thermal energy `k_B T` kept as a single scalar.
    pub k_t: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            k_t: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, k_t: f64) -> Result<Self> {
        ensure_positive("hbar", hbar)?;
        ensure_positive("mass", mass)?;
        if !(k_t >= 0.0) || !k_t.is_finite() {
            return Err(Error::InvalidArgument(format!("k_B T must be >= 0, got {k_t}")));
        }
        Ok(Self { hbar, mass, k_t })
    }
}

/// Expectation values `(<p>, <x>)` labelling a pointer state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub x: f64,
}

impl PhasePoint {
    pub const fn new(p: f64, x: f64) -> Self {
        Self { p, x }
    }

    pub const ORIGIN: Self = Self::new(0.0, 0.0);
}

/// The matrix `G = [[P, Q], [Q, X]]` of momentum/position second moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    p: f64,
    x: f64,
    q: f64,
    hbar: f64,
    det: f64,
    saturated: bool,
}

impl CovarianceMatrix {
    /// Builds an admissible matrix, rejecting anything below the uncertainty bound.
    pub fn new(p: f64, x: f64, q: f64, hbar: f64) -> Result<Self> {
        ensure_positive("hbar", hbar)?;
        ensure_positive("P", p)?;
        ensure_positive("X", x)?;
        if !q.is_finite() {
            return Err(Error::InvalidArgument(format!("Q must be finite, got {q}")));
        }
        let det = p * x - q * q;
        let bound = 0.25 * hbar * hbar;
        if det < bound * (1.0 - SATURATION_RTOL) {
            return Err(Error::UncertaintyViolation { det, bound });
        }
        Ok(Self {
            p,
            x,
            q,
            hbar,
            det,
            saturated: (det - bound).abs() <= SATURATION_RTOL * bound,
        })
    }

    /// The minimum-uncertainty matrix with the given `X` and `Q`.
    pub fn saturated_from_xq(x: f64, q: f64, hbar: f64) -> Result<Self> {
        ensure_positive("X", x)?;
        ensure_positive("hbar", hbar)?;
        let p = (0.25 * hbar * hbar + q * q) / x;
        Self::new(p, x, q, hbar)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// `(det - hbar^2/4) / (hbar^2/4)`.
    pub fn saturation_residual(&self) -> f64 {
        let bound = 0.25 * self.hbar * self.hbar;
        (self.det - bound) / bound
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.p, self.q, self.q, self.x)
    }

    /// Width parameter of the pointer-state Gaussian, `(hbar^2 / 4X)(1 - 2iQ/hbar)`.
    pub fn b_parameter(&self) -> Complex64 {
        let h = self.hbar;
        Complex64::new(1.0, -2.0 * self.q / h) * (h * h / (4.0 * self.x))
    }

    /// The momentum-variance form `P / (1 + 4Q^2/hbar^2) (1 - 2iQ/hbar)`.
    ///
    /// Equal to [`Self::b_parameter`] only on saturated matrices.
    pub fn b_parameter_from_p(&self) -> Complex64 {
        let h = self.hbar;
        let r = 2.0 * self.q / h;
        Complex64::new(1.0, -r) * (self.p / (1.0 + r * r))
    }

    /// `G^-1 = (1/det) [[X, -Q], [-Q, P]]`.
    pub fn invert(&self) -> Result<Matrix2<f64>> {
        if !(self.det > 0.0) {
            return Err(Error::SingularMatrix { det: self.det });
        }
        Ok(Matrix2::new(self.x, -self.q, -self.q, self.p) / self.det)
    }
}

/// Time derivative `dG/dt`, carrying the reference timescale used to
/// nondimensionalize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRate {
    pub p_dot: f64,
    pub x_dot: f64,
    pub q_dot: f64,
    pub timescale: f64,
}

impl CovarianceRate {
    pub fn zero(timescale: f64) -> Self {
        Self {
            p_dot: 0.0,
            x_dot: 0.0,
            q_dot: 0.0,
            timescale,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p_dot == 0.0 && self.x_dot == 0.0 && self.q_dot == 0.0
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.p_dot, self.q_dot, self.q_dot, self.x_dot)
    }
}

/// Finite-difference rates of a uniformly sampled `G(t)`.
pub fn rates_from_samples(samples: &[CovarianceMatrix], step: f64, timescale: f64) -> Vec<CovarianceRate> {
    let ps: Vec<f64> = samples.iter().map(|g| g.p).collect();
    let xs: Vec<f64> = samples.iter().map(|g| g.x).collect();
    let qs: Vec<f64> = samples.iter().map(|g| g.q).collect();
    let (dp, dx, dq) = (
        central_differences(&ps, step),
        central_differences(&xs, step),
        central_differences(&qs, step),
    );
    (0..samples.len())
        .map(|k| CovarianceRate {
            p_dot: dp[k],
            x_dot: dx[k],
            q_dot: dq[k],
            timescale,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Markovian,
    NonMarkovian,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Markovian => "Markovian",
            Regime::NonMarkovian => "NonMarkovian",
        })
    }
}

/// Stationary iff every relative rate `|dG| T / scale` stays within `tol`.
pub fn classify_regime(rate: &CovarianceRate, scale: &CovarianceMatrix, tol: f64) -> Regime {
    let t = rate.timescale;
    let measure = (rate.p_dot.abs() * t / scale.p)
        .max(rate.x_dot.abs() * t / scale.x)
        .max(rate.q_dot.abs() * t / (scale.p * scale.x).sqrt());
    if measure <= tol {
        Regime::Markovian
    } else {
        Regime::NonMarkovian
    }
}
