use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::phase::{CovarianceMatrix, CovarianceRate, PhasePoint};
use crate::series::{central_differences, TimeGrid};

/// Time-dependent centre `(<p0(t)>, <x0(t)>)` of the analogous state.
pub trait PhaseTrajectory {
    fn state(&self, t: f64) -> Result<PhasePoint>;
    /// `(d<p0>/dt, d<x0>/dt)`.
    fn velocity(&self, t: f64) -> Result<PhasePoint>;
}

/// A state that does not move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticTrajectory(pub PhasePoint);

impl PhaseTrajectory for StaticTrajectory {
    fn state(&self, _t: f64) -> Result<PhasePoint> {
        Ok(self.0)
    }
    fn velocity(&self, _t: f64) -> Result<PhasePoint> {
        Ok(PhasePoint::ORIGIN)
    }
}

/// Classical oscillator: `x0 = A cos(wt + phi)`, `p0 = -m w A sin(wt + phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTrajectory {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub mass: f64,
}

impl Default for HarmonicTrajectory {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            omega: 1.0,
            phase: 0.0,
            mass: 1.0,
        }
    }
}

impl HarmonicTrajectory {
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

impl PhaseTrajectory for HarmonicTrajectory {
    fn state(&self, t: f64) -> Result<PhasePoint> {
        let (s, c) = (self.omega * t + self.phase).sin_cos();
        Ok(PhasePoint::new(-self.mass * self.omega * self.amplitude * s, self.amplitude * c))
    }

    fn velocity(&self, t: f64) -> Result<PhasePoint> {
        let (s, c) = (self.omega * t + self.phase).sin_cos();
        let w = self.omega;
        Ok(PhasePoint::new(
            -self.mass * w * w * self.amplitude * c,
            -w * self.amplitude * s,
        ))
    }
}

/// Trajectory known only on a uniform grid, together with its derivative samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    grid: TimeGrid,
    states: Vec<PhasePoint>,
    velocities: Vec<PhasePoint>,
}

impl SampledTrajectory {
    pub fn new(grid: TimeGrid, states: Vec<PhasePoint>, velocities: Vec<PhasePoint>) -> Result<Self> {
        if states.len() != grid.len() || velocities.len() != grid.len() {
            return Err(Error::InvalidGrid("trajectory samples do not match the grid".into()));
        }
        Ok(Self {
            grid,
            states,
            velocities,
        })
    }

    pub fn from_analytic(traj: &impl PhaseTrajectory, grid: TimeGrid) -> Result<Self> {
        let states = grid.times().map(|t| traj.state(t)).collect::<Result<_>>()?;
        let velocities = grid.times().map(|t| traj.velocity(t)).collect::<Result<_>>()?;
        Self::new(grid, states, velocities)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[PhasePoint] {
        &self.states
    }

    pub fn velocities(&self) -> &[PhasePoint] {
        &self.velocities
    }

    /// Largest disagreement between the stored velocities and central
    /// differences of the stored states, relative to the peak speed.
    pub fn derivative_inconsistency(&self) -> f64 {
        let h = self.grid.step();
        let ps: Vec<f64> = self.states.iter().map(|s| s.p).collect();
        let xs: Vec<f64> = self.states.iter().map(|s| s.x).collect();
        let (dp, dx) = (central_differences(&ps, h), central_differences(&xs, h));
        let scale = self
            .velocities
            .iter()
            .map(|v| v.p.abs().max(v.x.abs()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return dp.iter().chain(&dx).map(|d| d.abs()).fold(0.0, f64::max);
        }
        // one-sided end differences are first order; judge the interior only
        (1..self.states.len() - 1)
            .map(|k| (dp[k] - self.velocities[k].p).abs().max((dx[k] - self.velocities[k].x).abs()))
            .fold(0.0, f64::max)
            / scale
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.grid.index_of(t).ok_or(Error::OffGrid { t })
    }
}

impl PhaseTrajectory for SampledTrajectory {
    fn state(&self, t: f64) -> Result<PhasePoint> {
        Ok(self.states[self.index(t)?])
    }
    fn velocity(&self, t: f64) -> Result<PhasePoint> {
        Ok(self.velocities[self.index(t)?])
    }
}

/// A covariance history `G(t)` with its exact rate.
pub trait CovarianceProfile {
    fn covariance(&self, t: f64) -> Result<CovarianceMatrix>;
    fn rate(&self, t: f64) -> Result<CovarianceRate>;
}

/// Time-independent `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCovariance {
    pub g: CovarianceMatrix,
    pub timescale: f64,
}

impl CovarianceProfile for ConstantCovariance {
    fn covariance(&self, _t: f64) -> Result<CovarianceMatrix> {
        Ok(self.g)
    }
    fn rate(&self, _t: f64) -> Result<CovarianceRate> {
        Ok(CovarianceRate::zero(self.timescale))
    }
}

/// Saturated `G(t)` with `X(t) = X0 (1 + a sin(nu t))`, `Q(t) = Q0 + b cos(nu t)`
/// and `P(t)` fixed by `det G = hbar^2 / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingCovariance {
    pub x0: f64,
    pub x_amplitude: f64,
    pub q0: f64,
    pub q_amplitude: f64,
    pub nu: f64,
    pub hbar: f64,
}

impl BreathingCovariance {
    pub fn new(x0: f64, x_amplitude: f64, q0: f64, q_amplitude: f64, nu: f64, hbar: f64) -> Result<Self> {
        ensure_positive("X0", x0)?;
        ensure_positive("hbar", hbar)?;
        if !(x_amplitude.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relative X amplitude must be below 1, got {x_amplitude}"
            )));
        }
        Ok(Self {
            x0,
            x_amplitude,
            q0,
            q_amplitude,
            nu,
            hbar,
        })
    }

    fn xq(&self, t: f64) -> (f64, f64, f64, f64) {
        let (s, c) = (self.nu * t).sin_cos();
        let x = self.x0 * (1.0 + self.x_amplitude * s);
        let q = self.q0 + self.q_amplitude * c;
        let x_dot = self.x0 * self.x_amplitude * self.nu * c;
        let q_dot = -self.q_amplitude * self.nu * s;
        (x, q, x_dot, q_dot)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.nu
    }
}

impl CovarianceProfile for BreathingCovariance {
    fn covariance(&self, t: f64) -> Result<CovarianceMatrix> {
        let (x, q, _, _) = self.xq(t);
        CovarianceMatrix::saturated_from_xq(x, q, self.hbar)
    }

    fn rate(&self, t: f64) -> Result<CovarianceRate> {
        let (x, q, x_dot, q_dot) = self.xq(t);
        let num = 0.25 * self.hbar * self.hbar + q * q;
        Ok(CovarianceRate {
            p_dot: (2.0 * q * q_dot * x - num * x_dot) / (x * x),
            x_dot,
            q_dot,
            timescale: self.period(),
        })
    }
}

/// `G(t)` sampled on a grid with finite-difference rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCovariance {
    grid: TimeGrid,
    samples: Vec<CovarianceMatrix>,
    rates: Vec<CovarianceRate>,
}

impl SampledCovariance {
    pub fn sample(profile: &impl CovarianceProfile, grid: TimeGrid, timescale: f64) -> Result<Self> {
        let samples: Vec<CovarianceMatrix> = grid.times().map(|t| profile.covariance(t)).collect::<Result<_>>()?;
        let rates = crate::phase::rates_from_samples(&samples, grid.step(), timescale);
        Ok(Self { grid, samples, rates })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[CovarianceMatrix] {
        &self.samples
    }

    pub fn rates(&self) -> &[CovarianceRate] {
        &self.rates
    }
}

impl CovarianceProfile for SampledCovariance {
    fn covariance(&self, t: f64) -> Result<CovarianceMatrix> {
        let k = self.grid.index_of(t).ok_or(Error::OffGrid { t })?;
        Ok(self.samples[k])
    }
    fn rate(&self, t: f64) -> Result<CovarianceRate> {
        let k = self.grid.index_of(t).ok_or(Error::OffGrid { t })?;
        Ok(self.rates[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_harmonic_is_unit_oscillator() {
        let h = HarmonicTrajectory::default();
        let s = h.state(0.3).unwrap();
        assert!((s.x - 0.3f64.cos()).abs() < 1e-15);
        assert!((s.p + 0.3f64.sin()).abs() < 1e-15);
        let v = h.velocity(0.3).unwrap();
        assert!((v.x + 0.3f64.sin()).abs() < 1e-15);
        assert!((v.p + 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn sampled_harmonic_is_consistent() {
        let h = HarmonicTrajectory::default();
        let grid = TimeGrid::new(h.period(), 2001).unwrap();
        let s = SampledTrajectory::from_analytic(&h, grid).unwrap();
        assert!(s.derivative_inconsistency() < 1e-4);
        assert!(matches!(s.state(0.001), Err(Error::OffGrid { .. })));
        assert_eq!(s.state(grid.at(7)).unwrap(), h.state(grid.at(7)).unwrap());
    }

    #[test]
    fn breathing_profile_stays_saturated_and_rate_matches() {
        let b = BreathingCovariance::new(0.5, 0.3, 0.1, 0.2, 1.3, 1.0).unwrap();
        let h = 1e-6;
        for t in [0.0, 0.4, 2.2, 5.0] {
            assert!(b.covariance(t).unwrap().is_saturated());
            let r = b.rate(t).unwrap();
            let (gp, gm) = (b.covariance(t + h).unwrap(), b.covariance(t - h).unwrap());
            assert!(((gp.p() - gm.p()) / (2.0 * h) - r.p_dot).abs() < 1e-7);
            assert!(((gp.x() - gm.x()) / (2.0 * h) - r.x_dot).abs() < 1e-7);
            assert!(((gp.q() - gm.q()) / (2.0 * h) - r.q_dot).abs() < 1e-7);
        }
    }
}
