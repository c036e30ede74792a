//! Finite-dimensional system-environment entanglement: the reduced density
//! matrix under a model of environment-state overlaps, and the decay of its
//! off-diagonal elements.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{ensure_positive, Error, Result};

/// Largest system dimension accepted by [`MultilevelModel::new`].
pub const MAX_DIMENSION: usize = 64;

type OverlapFn = dyn Fn(f64) -> DMatrix<Complex64> + Send + Sync;

/// Overlaps `E_ij(t) = <e_i(t)|e_j(t)>` of the environment states correlated
/// with each system basis state. All branches start from the same
/// environment state, so `E(0)` is the all-ones matrix for the built-in models.
#[derive(Clone)]
pub enum OverlapModel {
    /// `E_ij = exp(-t / tau_d)` for `i != j`.
    ExponentialDecay { tau_d: f64 },
    /// `E_ij = exp(-(t / tau_d)^2)` for `i != j`.
    GaussianDecay { tau_d: f64 },
    User(Arc<OverlapFn>),
}

impl OverlapModel {
    pub fn user(f: impl Fn(f64) -> DMatrix<Complex64> + Send + Sync + 'static) -> Self {
        Self::User(Arc::new(f))
    }

    /// Common off-diagonal overlap of the built-in models.
    fn off_diagonal(&self, t: f64) -> Option<f64> {
        match self {
            Self::ExponentialDecay { tau_d } => Some((-t / tau_d).exp()),
            Self::GaussianDecay { tau_d } => Some((-(t / tau_d).powi(2)).exp()),
            Self::User(_) => None,
        }
    }

    pub fn matrix(&self, n: usize, t: f64) -> DMatrix<Complex64> {
        match self {
            Self::User(f) => f(t),
            _ => {
                let f = self.off_diagonal(t).unwrap_or(0.0);
                DMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { 1.0 } else { f }, 0.0))
            }
        }
    }

    fn timescale(&self) -> Option<f64> {
        match self {
            Self::ExponentialDecay { tau_d } | Self::GaussianDecay { tau_d } => Some(*tau_d),
            Self::User(_) => None,
        }
    }
}

impl fmt::Debug for OverlapModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExponentialDecay { tau_d } => f.debug_struct("ExponentialDecay").field("tau_d", tau_d).finish(),
            Self::GaussianDecay { tau_d } => f.debug_struct("GaussianDecay").field("tau_d", tau_d).finish(),
            Self::User(_) => f.write_str("User(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultilevelModel {
    coeffs: Vec<Complex64>,
    overlap: OverlapModel,
}

impl MultilevelModel {
    pub fn new(coeffs: Vec<Complex64>, overlap: OverlapModel) -> Result<Self> {
        Self::with_max_dimension(coeffs, overlap, MAX_DIMENSION)
    }

    pub fn with_max_dimension(coeffs: Vec<Complex64>, overlap: OverlapModel, max: usize) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > max {
            return Err(Error::Dimension { got: coeffs.len(), max });
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        if let Some(tau) = overlap.timescale() {
            ensure_positive("tau_d", tau)?;
        }
        Ok(Self { coeffs, overlap })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn overlap(&self) -> &OverlapModel {
        &self.overlap
    }

    /// Overlap matrix at `t`, checked for unit diagonal, Hermiticity and positivity.
    pub fn overlaps(&self, t: f64) -> Result<DMatrix<Complex64>> {
        let n = self.dim();
        let e = self.overlap.matrix(n, t);
        let bad = |reason: String| Err(Error::InvalidOverlap { t, reason });
        if e.shape() != (n, n) {
            return bad(format!("shape {:?}, expected ({n}, {n})", e.shape()));
        }
        for i in 0..n {
            if (e[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                return bad(format!("diagonal entry {i} is {}", e[(i, i)]));
            }
            for j in 0..i {
                if (e[(i, j)] - e[(j, i)].conj()).norm() > 1e-12 {
                    return bad(format!("entries ({i},{j}) and ({j},{i}) are not conjugate"));
                }
            }
        }
        let min = min_eigenvalue(&e);
        if min < -1e-10 {
            return bad(format!("negative eigenvalue {min}"));
        }
        Ok(e)
    }
}

/// Reduced density matrix of the system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub matrix: DMatrix<Complex64>,
    pub t: f64,
}

impl ReducedDensity {
    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Partial trace over the environment, summed over an orthonormal trace basis.
///
/// The environment states are realized as vectors `e_i = V[:, i]` with
/// `V^H V = E(t)`, and `rho_ij = sum_k C_i conj(C_j) <k|e_i> <e_j|k>`.
pub fn reduced_density(model: &MultilevelModel, t: f64) -> Result<ReducedDensity> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let e = model.overlaps(t)?;
    let n = model.dim();
    let eig = SymmetricEigen::new(e);
    // V = diag(sqrt(lambda)) U^H
    let mut v = eig.eigenvectors.adjoint();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.row_mut(k).scale_mut(s);
    }
    let c = model.coeffs();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let sum: Complex64 = (0..n).map(|k| v[(k, i)] * v[(k, j)].conj()).sum();
        c[i] * c[j].conj() * sum
    });
    Ok(ReducedDensity { matrix, t })
}

/// `rho_ij = C_i conj(C_j) E_ji(t)`, the collapsed form of [`reduced_density`].
pub fn reduced_density_direct(model: &MultilevelModel, t: f64) -> Result<ReducedDensity> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let e = model.overlaps(t)?;
    let c = model.coeffs();
    let matrix = DMatrix::from_fn(model.dim(), model.dim(), |i, j| c[i] * c[j].conj() * e[(j, i)]);
    Ok(ReducedDensity { matrix, t })
}

/// Sum of the moduli of the off-diagonal elements.
pub fn coherence_norm(rho: &ReducedDensity) -> f64 {
    let m = &rho.matrix;
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                acc += m[(i, j)].norm();
            }
        }
    }
    acc
}

/// `tr(rho^2)`.
pub fn purity(rho: &ReducedDensity) -> f64 {
    (&rho.matrix * &rho.matrix).trace().re
}

/// Samples used to bracket the threshold crossing before bisection.
const SCAN_SAMPLES: usize = 512;

/// Earliest time at which the coherence norm has fallen to `threshold` times its initial value.
///
/// `horizon` bounds the search; built-in models default to `100 tau_d`,
/// user overlaps must supply one.
pub fn decoherence_time(model: &MultilevelModel, threshold: f64, horizon: Option<f64>) -> Result<f64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must be in (0, 1], got {threshold}")));
    }
    if threshold == 1.0 {
        return Ok(0.0);
    }
    let horizon = match (horizon, model.overlap.timescale()) {
        (Some(h), _) => h,
        (None, Some(tau)) => 100.0 * tau,
        (None, None) => return Err(Error::InvalidArgument("user overlap models need a search horizon".into())),
    };
    ensure_positive("horizon", horizon)?;
    let c0 = coherence_norm(&reduced_density_direct(model, 0.0)?);
    let not_reached = Error::NotReached { threshold, horizon };
    if c0 == 0.0 {
        return Err(not_reached);
    }
    let ratio = |t: f64| -> Result<f64> { Ok(coherence_norm(&reduced_density_direct(model, t)?) / c0) };

    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=SCAN_SAMPLES {
        let t = horizon * k as f64 / SCAN_SAMPLES as f64;
        if ratio(t)? <= threshold {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or(not_reached)?;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if ratio(mid)? <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
