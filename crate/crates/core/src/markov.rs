//! Lindblad channels linear in `p` and `x`, their diffusion and friction
//! coefficients, and the covariance matrix they select.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::phase::{CovarianceMatrix, PhysicalConstants};
use crate::pointer::PhaseTrajectory;

/// Default number of channels accepted by [`channel_coefficients`].
pub const MAX_CHANNELS: usize = 2;

/// Coupling operator `V = a p + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladChannel {
    pub a: Complex64,
    pub b: Complex64,
}

impl LindbladChannel {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        if a == Complex64::new(0.0, 0.0) && b == Complex64::new(0.0, 0.0) {
            return Err(Error::NullChannel);
        }
        Ok(Self { a, b })
    }

    /// `a* b`, whose real and imaginary parts feed the cross diffusion and the friction.
    pub fn cross(&self) -> Complex64 {
        self.a.conj() * self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSet {
    pub d_pp: f64,
    pub d_xx: f64,
    pub d_px: f64,
    /// Friction coefficient.
    pub lambda: f64,
}

impl DiffusionSet {
    /// `D_pp D_xx - D_px^2 - (hbar^2/4) Lambda^2`, nonnegative for any channel set.
    pub fn surplus(&self, hbar: f64) -> f64 {
        self.d_pp * self.d_xx - self.d_px * self.d_px - 0.25 * hbar * hbar * self.lambda * self.lambda
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            d_pp: c * self.d_pp,
            d_xx: c * self.d_xx,
            d_px: c * self.d_px,
            lambda: c * self.lambda,
        }
    }
}

/// Diffusion and friction coefficients of at most [`MAX_CHANNELS`] channels.
pub fn channel_coefficients(channels: &[LindbladChannel], hbar: f64) -> Result<DiffusionSet> {
    channel_coefficients_with(channels, hbar, false)
}

/// As [`channel_coefficients`]; `allow_many_channels` lifts the two-channel cap.
pub fn channel_coefficients_with(channels: &[LindbladChannel], hbar: f64, allow_many_channels: bool) -> Result<DiffusionSet> {
    ensure_positive("hbar", hbar)?;
    let max = if allow_many_channels { usize::MAX } else { MAX_CHANNELS };
    if channels.is_empty() || channels.len() > max {
        return Err(Error::ChannelCount {
            got: channels.len(),
            max,
        });
    }
    let sum_a: f64 = channels.iter().map(|c| c.a.norm_sqr()).sum();
    let sum_b: f64 = channels.iter().map(|c| c.b.norm_sqr()).sum();
    let cross: Complex64 = channels.iter().map(LindbladChannel::cross).sum();
    Ok(DiffusionSet {
        d_xx: 0.5 * hbar * sum_a,
        d_pp: 0.5 * hbar * sum_b,
        d_px: 0.0 - 0.5 * hbar * cross.re,
        lambda: 0.0 - cross.im,
    })
}

/// Result of matching the Lindblad coefficients to a phase-space covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub covariance: CovarianceMatrix,
    /// Relative determinant surplus `(det - hbar^2/4)/(hbar^2/4)` when the
    /// result is not a minimum-uncertainty matrix.
    pub unsaturated_surplus: Option<f64>,
}

/// `P = D_pp / Lambda`, `X = D_xx / Lambda`, `Q = D_px / Lambda`.
pub fn identify_qps(d: &DiffusionSet, hbar: f64) -> Result<Identification> {
    if !(d.lambda > 0.0) {
        return Err(Error::FrictionNonpositive { lambda: d.lambda });
    }
    let covariance = CovarianceMatrix::new(d.d_pp / d.lambda, d.d_xx / d.lambda, d.d_px / d.lambda, hbar)?;
    let unsaturated_surplus = (!covariance.is_saturated()).then(|| covariance.saturation_residual());
    Ok(Identification {
        covariance,
        unsaturated_surplus,
    })
}

/// `H = A_pp p^2 + A_xx x^2 + A_px (xp + px) + A_p p + A_x x + A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    pub a_pp: f64,
    pub a_xx: f64,
    pub a_px: f64,
    pub a_p: f64,
    pub a_x: f64,
    pub a: f64,
}

/// Hamiltonian coefficients compatible with `G` and the trajectory velocity at `t`.
///
/// The constant offset is arbitrary and set to zero.
pub fn hamiltonian_coefficients(
    g: &CovarianceMatrix,
    consts: &PhysicalConstants,
    traj: &impl PhaseTrajectory,
    t: f64,
) -> Result<QuadraticHamiltonian> {
    let m = consts.mass;
    let u = traj.velocity(t)?;
    Ok(QuadraticHamiltonian {
        a_pp: 1.0 / (2.0 * m),
        a_xx: g.p() / (2.0 * m * g.x()),
        a_px: 0.0 - g.q() / (2.0 * m * g.x()),
        a_p: -u.p,
        a_x: u.x,
        a: 0.0,
    })
}

/// Constant position-decoherence rate `2 m gamma k_B T / hbar^2`.
pub fn gamma_markov(consts: &PhysicalConstants, gamma_friction: f64) -> Result<f64> {
    ensure_positive("gamma", gamma_friction)?;
    ensure_positive("k_B T", consts.k_t)?;
    Ok(2.0 * consts.mass * gamma_friction * consts.k_t / (consts.hbar * consts.hbar))
}

/// `rho0 exp(-Gamma t dx^2)`.
pub fn coherence_decay(rho0: Complex64, dx: f64, gamma: f64, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(rho0 * (-gamma * t * dx * dx).exp())
}
