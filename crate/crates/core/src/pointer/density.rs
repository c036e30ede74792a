use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trajectory::{CovarianceProfile, PhaseTrajectory};
use crate::error::{Error, Result};
use crate::phase::{CovarianceMatrix, CovarianceRate, PhasePoint, Regime};

/// Matrix element `<z| rho(t) |z'>` of the projector onto the moving state `|z0(t)>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityElement {
    pub value: Complex64,
    pub z: PhasePoint,
    pub z_prime: PhasePoint,
    /// Evaluation time, when the element came from a trajectory.
    pub t: Option<f64>,
}

fn require_saturated(g: &CovarianceMatrix) -> Result<()> {
    if g.is_saturated() {
        Ok(())
    } else {
        Err(Error::NotSaturated {
            det: g.det(),
            bound: 0.25 * g.hbar() * g.hbar(),
        })
    }
}

/// Offsets `y0 = (p0 - p, x0 - x)` and `y0' = (p0 - p', x0 - x')`.
fn offsets(z: PhasePoint, z_prime: PhasePoint, z0: PhasePoint) -> (Vector2<f64>, Vector2<f64>) {
    (
        Vector2::new(z0.p - z.p, z0.x - z.x),
        Vector2::new(z0.p - z_prime.p, z0.x - z_prime.x),
    )
}

fn quad(y: &Vector2<f64>, m: &Matrix2<f64>) -> f64 {
    (y.transpose() * m * y)[(0, 0)]
}

/// Closed form of `<z|z0><z0|z'>` for pointer states sharing the saturated `G`:
///
/// `exp(-1/8 [y0 G^-1 y0 + y0' G^-1 y0'] + i/(2 hbar) [(x0 + x)(p0 - p) - (x0 + x')(p0 - p')])`.
pub fn rho_element(z: PhasePoint, z_prime: PhasePoint, z0: PhasePoint, g: &CovarianceMatrix) -> Result<DensityElement> {
    require_saturated(g)?;
    let ginv = g.invert()?;
    let (y, yp) = offsets(z, z_prime, z0);
    let re = -0.125 * (quad(&y, &ginv) + quad(&yp, &ginv));
    let im = ((z0.x + z.x) * (z0.p - z.p) - (z0.x + z_prime.x) * (z0.p - z_prime.p)) / (2.0 * g.hbar());
    Ok(DensityElement {
        value: Complex64::new(re, im).exp(),
        z,
        z_prime,
        t: None,
    })
}

/// [`rho_element`] with `z0` and `G` read from their histories at time `t`.
pub fn rho_on_trajectory(
    z: PhasePoint,
    z_prime: PhasePoint,
    traj: &impl PhaseTrajectory,
    profile: &impl CovarianceProfile,
    t: f64,
) -> Result<DensityElement> {
    let mut el = rho_element(z, z_prime, traj.state(t)?, &profile.covariance(t)?)?;
    el.t = Some(t);
    Ok(el)
}

/// Real decay rate `Phi` and real phase rate `Theta` with `d rho/dt = (Phi + i Theta) rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRates {
    pub phi: f64,
    pub theta: f64,
}

/// Logarithmic rates of the density element along a trajectory.
///
/// `Phi = -1/4 u0 G^-1 (y0 + y0')`, plus `-1/8 [y0 dG^-1 y0 + y0' dG^-1 y0']`
/// with `dG^-1 = -G^-1 dG G^-1` when the environment is reactive.
/// `Theta = (1/2hbar) [dp0 (x - x') - dx0 (p - p')]` in both regimes.
#[allow(clippy::too_many_arguments)]
pub fn log_rates(
    z: PhasePoint,
    z_prime: PhasePoint,
    z0: PhasePoint,
    u0: PhasePoint,
    g: &CovarianceMatrix,
    g_dot: &CovarianceRate,
    regime: Regime,
) -> Result<LogRates> {
    if regime == Regime::Markovian && !g_dot.is_zero() {
        return Err(Error::RegimeMismatch);
    }
    require_saturated(g)?;
    let ginv = g.invert()?;
    let (y, yp) = offsets(z, z_prime, z0);
    let u = Vector2::new(u0.p, u0.x);
    let mut phi = -0.25 * (u.transpose() * ginv * (y + yp))[(0, 0)];
    if regime == Regime::NonMarkovian {
        let ginv_dot = -(ginv * g_dot.matrix() * ginv);
        phi -= 0.125 * (quad(&y, &ginv_dot) + quad(&yp, &ginv_dot));
    }
    let theta = (u0.p * (z.x - z_prime.x) - u0.x * (z.p - z_prime.p)) / (2.0 * g.hbar());
    Ok(LogRates { phi, theta })
}

/// `d rho / dt = (Phi + i Theta) rho` at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn rho_time_derivative(
    z: PhasePoint,
    z_prime: PhasePoint,
    traj: &impl PhaseTrajectory,
    g: &CovarianceMatrix,
    g_dot: &CovarianceRate,
    t: f64,
    regime: Regime,
) -> Result<Complex64> {
    let z0 = traj.state(t)?;
    let u0 = traj.velocity(t)?;
    let rates = log_rates(z, z_prime, z0, u0, g, g_dot, regime)?;
    let rho = rho_element(z, z_prime, z0, g)?.value;
    Ok(Complex64::new(rates.phi, rates.theta) * rho)
}

/// Central difference of the density element along `traj` and `profile`.
pub fn finite_difference_rate(
    z: PhasePoint,
    z_prime: PhasePoint,
    traj: &impl PhaseTrajectory,
    profile: &impl CovarianceProfile,
    t: f64,
    h: f64,
) -> Result<Complex64> {
    let fwd = rho_on_trajectory(z, z_prime, traj, profile, t + h)?.value;
    let bwd = rho_on_trajectory(z, z_prime, traj, profile, t - h)?.value;
    Ok((fwd - bwd) / (2.0 * h))
}

/// One comparison of the analytic derivative with its finite-difference estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSample {
    pub t: f64,
    pub z: PhasePoint,
    pub z_prime: PhasePoint,
    pub rho: Complex64,
    pub analytic: Complex64,
    pub finite_difference: Complex64,
    /// `|analytic - fd| / max(|fd|, |rho| / T)`.
    pub rel_err: f64,
}

/// Compares [`rho_time_derivative`] against [`finite_difference_rate`] with step `1e-5 T`.
///
/// `rates` supplies the `dG/dt` handed to the analytic expression (exact or
/// sampled); `profile` supplies `G(t)` for the finite differences.
#[allow(clippy::too_many_arguments)]
pub fn derivative_check(
    pairs: &[(PhasePoint, PhasePoint)],
    times: &[f64],
    traj: &impl PhaseTrajectory,
    profile: &impl CovarianceProfile,
    rates: &impl CovarianceProfile,
    period: f64,
    regime: Regime,
) -> Result<Vec<DerivativeSample>> {
    let h = 1e-5 * period;
    let mut out = Vec::with_capacity(pairs.len() * times.len());
    for &t in times {
        let g = profile.covariance(t)?;
        let g_dot = match regime {
            Regime::Markovian => CovarianceRate::zero(period),
            Regime::NonMarkovian => rates.rate(t)?,
        };
        for &(z, z_prime) in pairs {
            let rho = rho_on_trajectory(z, z_prime, traj, profile, t)?.value;
            let analytic = rho_time_derivative(z, z_prime, traj, &g, &g_dot, t, regime)?;
            let fd = finite_difference_rate(z, z_prime, traj, profile, t, h)?;
            let scale = fd.norm().max(rho.norm() / period);
            let rel_err = if scale > 0.0 { (analytic - fd).norm() / scale } else { 0.0 };
            out.push(DerivativeSample {
                t,
                z,
                z_prime,
                rho,
                analytic,
                finite_difference: fd,
                rel_err,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointer::{ConstantCovariance, StaticTrajectory};

    fn g0() -> CovarianceMatrix {
        CovarianceMatrix::new(0.5, 0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn diagonal_on_the_state_is_one() {
        let z0 = PhasePoint::new(0.3, -0.8);
        let el = rho_element(z0, z0, z0, &g0()).unwrap();
        assert!((el.value - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_offsets_modulus() {
        // each factor is exp(-d^2/(8X)) with X = 0.5
        let d = 0.9;
        let el = rho_element(PhasePoint::new(0.0, d), PhasePoint::new(0.0, -d), PhasePoint::ORIGIN, &g0()).unwrap();
        assert!((el.value.norm() - (-d * d / 2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn static_stationary_diagonal_has_zero_rate() {
        let z0 = PhasePoint::new(0.2, 0.1);
        let traj = StaticTrajectory(z0);
        let d = rho_time_derivative(z0, z0, &traj, &g0(), &CovarianceRate::zero(1.0), 0.0, Regime::Markovian).unwrap();
        assert_eq!(d, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn markovian_with_nonzero_rate_is_rejected() {
        let z0 = PhasePoint::ORIGIN;
        let rate = CovarianceRate {
            p_dot: 0.1,
            x_dot: 0.0,
            q_dot: 0.0,
            timescale: 1.0,
        };
        let r = rho_time_derivative(z0, z0, &StaticTrajectory(z0), &g0(), &rate, 0.0, Regime::Markovian);
        assert_eq!(r, Err(Error::RegimeMismatch));
    }

    #[test]
    fn unsaturated_covariance_is_rejected() {
        let g = CovarianceMatrix::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let z = PhasePoint::ORIGIN;
        assert!(matches!(rho_element(z, z, z, &g), Err(Error::NotSaturated { .. })));
    }

    #[test]
    fn static_trajectory_check_has_no_error() {
        let traj = StaticTrajectory(PhasePoint::new(0.5, 0.5));
        let profile = ConstantCovariance { g: g0(), timescale: 1.0 };
        let pairs = [(PhasePoint::new(0.0, 1.0), PhasePoint::new(1.0, 0.0))];
        let out = derivative_check(&pairs, &[0.5], &traj, &profile, &profile, 1.0, Regime::Markovian).unwrap();
        assert!(out[0].analytic.norm() < 1e-15);
        assert!(out[0].rel_err < 1e-8);
    }
}
