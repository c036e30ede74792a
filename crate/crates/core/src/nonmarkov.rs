//! Memory-kernel dynamics: time-dependent diffusion and friction coefficients,
//! the covariance history they select, its saturation audit, and detection
//! of recoherence in a time-dependent decoherence exponent.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::markov::{DiffusionSet, LindbladChannel};
use crate::phase::{rates_from_samples, CovarianceMatrix, CovarianceRate, Regime};
use crate::quadrature::cumulative_trapezoid;
use crate::series::{central_differences, TimeGrid, TimeSeries};

/// Step-halving tolerance of the coefficient quadrature.
pub const DEFAULT_QUADRATURE_RTOL: f64 = 1e-6;
/// Threshold on `|Lambda(t)|` below which the covariance ratios are masked.
pub const DEFAULT_EPSILON_LAMBDA: f64 = 1e-9;
/// Smallest grid accepted by [`time_dependent_coefficients`].
pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRole {
    /// Noise correlation `C_j`.
    Noise,
    /// Dissipation kernel `D_j`.
    Dissipation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelShape {
    /// `A exp(-tau / tau_c)`.
    Exponential { amplitude: f64, tau_c: f64 },
    /// `A cos(omega0 tau) exp(-tau / tau_c)`.
    DampedOscillatory { amplitude: f64, tau_c: f64, omega0: f64 },
    /// `(weight / width) exp(-tau / width)`, a one-sided delta of mass `weight`.
    NarrowDelta { weight: f64, width: f64 },
    /// Linear interpolation of samples, zero past the last one.
    Tabulated { series: TimeSeries },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernel {
    pub shape: KernelShape,
    pub role: KernelRole,
}

impl MemoryKernel {
    pub fn new(shape: KernelShape, role: KernelRole) -> Result<Self> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")))
            }
        };
        match &shape {
            KernelShape::Exponential { amplitude, tau_c } => {
                finite("amplitude", *amplitude)?;
                ensure_positive("tau_c", *tau_c)?;
            }
            KernelShape::DampedOscillatory {
                amplitude,
                tau_c,
                omega0,
            } => {
                finite("amplitude", *amplitude)?;
                finite("omega0", *omega0)?;
                ensure_positive("tau_c", *tau_c)?;
            }
            KernelShape::NarrowDelta { weight, width } => {
                finite("weight", *weight)?;
                ensure_positive("width", *width)?;
            }
            KernelShape::Tabulated { series } => {
                if series.grid.start() != 0.0 {
                    return Err(Error::InvalidGrid("tabulated kernels must start at lag 0".into()));
                }
                if series.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("tabulated kernel has non-finite samples".into()));
                }
            }
        }
        Ok(Self { shape, role })
    }

    pub fn noise(shape: KernelShape) -> Result<Self> {
        Self::new(shape, KernelRole::Noise)
    }

    pub fn dissipation(shape: KernelShape) -> Result<Self> {
        Self::new(shape, KernelRole::Dissipation)
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::NegativeLag(tau));
        }
        Ok(self.value(tau))
    }

    fn value(&self, tau: f64) -> f64 {
        match &self.shape {
            KernelShape::Exponential { amplitude, tau_c } => amplitude * (-tau / tau_c).exp(),
            KernelShape::DampedOscillatory {
                amplitude,
                tau_c,
                omega0,
            } => amplitude * (omega0 * tau).cos() * (-tau / tau_c).exp(),
            KernelShape::NarrowDelta { weight, width } => weight / width * (-tau / width).exp(),
            KernelShape::Tabulated { series } => series.interpolate(tau).unwrap_or(0.0),
        }
    }

    /// Multiplies the kernel by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let shape = match &self.shape {
            KernelShape::Exponential { amplitude, tau_c } => KernelShape::Exponential {
                amplitude: c * amplitude,
                tau_c: *tau_c,
            },
            KernelShape::DampedOscillatory {
                amplitude,
                tau_c,
                omega0,
            } => KernelShape::DampedOscillatory {
                amplitude: c * amplitude,
                tau_c: *tau_c,
                omega0: *omega0,
            },
            KernelShape::NarrowDelta { weight, width } => KernelShape::NarrowDelta {
                weight: c * weight,
                width: *width,
            },
            KernelShape::Tabulated { series } => KernelShape::Tabulated {
                series: TimeSeries {
                    values: series.values.iter().map(|v| c * v).collect(),
                    ..series.clone()
                },
            },
        };
        Self { shape, role: self.role }
    }
}

/// One coupling channel with its memory kernels and mode frequency `omega_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub channel: LindbladChannel,
    pub noise: MemoryKernel,
    pub dissipation: MemoryKernel,
    pub omega: f64,
}

impl ChannelSpec {
    pub fn new(channel: LindbladChannel, noise: MemoryKernel, dissipation: MemoryKernel, omega: f64) -> Result<Self> {
        if noise.role != KernelRole::Noise {
            return Err(Error::KernelRole {
                expected: KernelRole::Noise,
                found: noise.role,
            });
        }
        if dissipation.role != KernelRole::Dissipation {
            return Err(Error::KernelRole {
                expected: KernelRole::Dissipation,
                found: dissipation.role,
            });
        }
        if !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("omega must be finite, got {omega}")));
        }
        Ok(Self {
            channel,
            noise,
            dissipation,
            omega,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            channel: self.channel,
            noise: self.noise.scaled(c),
            dissipation: self.dissipation.scaled(c),
            omega: self.omega,
        }
    }
}

/// Channel whose narrow kernels of width `width` approach the Lindblad
/// coefficients of `channel` as `omega * width -> 0`.
///
/// Both plateaus equal the Lindblad values times `1 / (1 + (omega width)^2)`.
pub fn narrow_delta_spec(channel: LindbladChannel, omega: f64, width: f64) -> Result<ChannelSpec> {
    ensure_positive("omega", omega)?;
    ensure_positive("width", width)?;
    ChannelSpec::new(
        channel,
        MemoryKernel::noise(KernelShape::NarrowDelta { weight: 1.0, width })?,
        MemoryKernel::dissipation(KernelShape::NarrowDelta {
            weight: 1.0 / (omega * width),
            width,
        })?,
        omega,
    )
}

/// Channel with identical exponential kernels and `omega = 1 / tau_c`, whose
/// plateau coefficients equal the Lindblad coefficients of `channel` exactly.
pub fn matched_exponential_spec(channel: LindbladChannel, tau_c: f64) -> Result<ChannelSpec> {
    ensure_positive("tau_c", tau_c)?;
    let shape = KernelShape::Exponential {
        amplitude: 2.0 / tau_c,
        tau_c,
    };
    ChannelSpec::new(
        channel,
        MemoryKernel::noise(shape.clone())?,
        MemoryKernel::dissipation(shape)?,
        1.0 / tau_c,
    )
}

/// `D_pp(t)`, `D_xx(t)`, `D_px(t)` and `Lambda(t)` on one grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSeries {
    pub grid: TimeGrid,
    pub d_pp: TimeSeries,
    pub d_xx: TimeSeries,
    pub d_px: TimeSeries,
    pub lambda: TimeSeries,
    /// Largest relative change of any running integral under step halving.
    pub max_refinement_change: f64,
}

impl CoefficientSeries {
    pub fn at(&self, k: usize) -> DiffusionSet {
        DiffusionSet {
            d_pp: self.d_pp.values[k],
            d_xx: self.d_xx.values[k],
            d_px: self.d_px.values[k],
            lambda: self.lambda.values[k],
        }
    }

    pub fn last(&self) -> DiffusionSet {
        self.at(self.grid.len() - 1)
    }
}

pub fn time_dependent_coefficients(specs: &[ChannelSpec], hbar: f64, grid: &TimeGrid) -> Result<CoefficientSeries> {
    time_dependent_coefficients_with(specs, hbar, grid, DEFAULT_QUADRATURE_RTOL)
}

/// Memory integrals of every channel, weighted by its couplings.
pub fn time_dependent_coefficients_with(
    specs: &[ChannelSpec],
    hbar: f64,
    grid: &TimeGrid,
    rtol: f64,
) -> Result<CoefficientSeries> {
    ensure_positive("hbar", hbar)?;
    ensure_positive("rtol", rtol)?;
    if grid.start() != 0.0 {
        return Err(Error::InvalidGrid(format!("grid must start at 0, starts at {}", grid.start())));
    }
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_GRID_POINTS} points, got {}",
            grid.len()
        )));
    }
    let n = grid.len();
    let (mut d_pp, mut d_xx, mut d_px, mut lambda) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut worst = 0.0f64;

    let per_channel = std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| {
                s.spawn(move || -> Result<_> {
                    let w = spec.omega;
                    let noise = cumulative_trapezoid(|tau| spec.noise.value(tau) * (w * tau).cos(), grid, rtol)?;
                    let diss = cumulative_trapezoid(|tau| spec.dissipation.value(tau) * (w * tau).sin(), grid, rtol)?;
                    Ok((noise, diss))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("quadrature worker panicked")).collect::<Vec<_>>()
    });

    for (spec, integrals) in specs.iter().zip(per_channel) {
        let (noise, diss) = integrals?;
        worst = worst.max(noise.max_refinement_change).max(diss.max_refinement_change);
        let cross = spec.channel.cross();
        let (aa, bb) = (spec.channel.a.norm_sqr(), spec.channel.b.norm_sqr());
        for k in 0..n {
            d_xx[k] += 0.5 * hbar * aa * noise.values[k];
            d_pp[k] += 0.5 * hbar * bb * noise.values[k];
            d_px[k] -= 0.5 * hbar * cross.re * noise.values[k];
            lambda[k] -= cross.im * diss.values[k];
        }
    }

    let series = |name: &str, v| TimeSeries::new(name, "natural", *grid, v);
    Ok(CoefficientSeries {
        grid: *grid,
        d_pp: series("D_pp", d_pp)?,
        d_xx: series("D_xx", d_xx)?,
        d_px: series("D_px", d_px)?,
        lambda: series("Lambda", lambda)?,
        max_refinement_change: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpsValues {
    pub p: f64,
    pub x: f64,
    pub q: f64,
    /// `P X - Q^2 - hbar^2 / 4`.
    pub det_residual: f64,
}

impl QpsValues {
    fn new(p: f64, x: f64, q: f64, hbar: f64) -> Self {
        Self {
            p,
            x,
            q,
            det_residual: p * x - q * q - 0.25 * hbar * hbar,
        }
    }

    /// `det_residual` relative to `hbar^2 / 4`.
    pub fn relative_residual(&self, hbar: f64) -> f64 {
        self.det_residual / (0.25 * hbar * hbar)
    }
}

/// One grid point of the covariance history; `values` is `None` where `|Lambda| <= epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpsSample {
    pub t: f64,
    pub lambda: f64,
    pub values: Option<QpsValues>,
}

impl QpsSample {
    pub fn is_masked(&self) -> bool {
        self.values.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpsTrajectory {
    pub grid: TimeGrid,
    pub hbar: f64,
    pub epsilon_lambda: f64,
    pub samples: Vec<QpsSample>,
}

impl QpsTrajectory {
    pub fn unmasked(&self) -> impl Iterator<Item = (f64, QpsValues)> + '_ {
        self.samples.iter().filter_map(|s| s.values.map(|v| (s.t, v)))
    }

    /// Finite-difference rates over the trailing unmasked run, with
    /// `timescale` attached, paired with the matrices they belong to. Samples
    /// that are not admissible covariance matrices end the run.
    pub fn trailing_rates(&self, timescale: f64) -> Vec<(CovarianceMatrix, CovarianceRate)> {
        let mut run = Vec::new();
        for s in self.samples.iter().rev() {
            match s.values.and_then(|v| CovarianceMatrix::new(v.p, v.x, v.q, self.hbar).ok()) {
                Some(g) => run.push(g),
                None => break,
            }
        }
        run.reverse();
        if run.len() < 2 {
            return Vec::new();
        }
        let rates = rates_from_samples(&run, self.grid.step(), timescale);
        run.into_iter().zip(rates).collect()
    }
}

impl QpsTrajectory {
    /// Stationarity of the trailing unmasked run, using the same relative
    /// rate measure as [`crate::classify_regime`] on the raw ratios, which need not
    /// be admissible covariance matrices.
    pub fn trailing_regime(&self, timescale: f64, tol: f64) -> Option<Regime> {
        let mut run: Vec<QpsValues> = self.samples.iter().rev().map_while(|s| s.values).collect();
        run.reverse();
        if run.len() < 2 {
            return None;
        }
        let step = self.grid.step();
        let diff = |f: fn(&QpsValues) -> f64| central_differences(&run.iter().map(f).collect::<Vec<_>>(), step);
        let (dp, dx, dq) = (diff(|v| v.p), diff(|v| v.x), diff(|v| v.q));
        let stationary = run.iter().enumerate().all(|(k, v)| {
            let measure = (dp[k].abs() / v.p.abs())
                .max(dx[k].abs() / v.x.abs())
                .max(dq[k].abs() / (v.p * v.x).abs().sqrt());
            measure * timescale <= tol
        });
        Some(if stationary { Regime::Markovian } else { Regime::NonMarkovian })
    }
}

/// Pointwise `P = D_pp / Lambda`, `X = D_xx / Lambda`, `Q = D_px / Lambda`.
pub fn qps_trajectory(cs: &CoefficientSeries, hbar: f64, epsilon_lambda: f64) -> Result<QpsTrajectory> {
    ensure_positive("hbar", hbar)?;
    ensure_positive("epsilon_lambda", epsilon_lambda)?;
    let samples: Vec<QpsSample> = (0..cs.grid.len())
        .map(|k| {
            let d = cs.at(k);
            let values =
                (d.lambda.abs() > epsilon_lambda).then(|| QpsValues::new(d.d_pp / d.lambda, d.d_xx / d.lambda, d.d_px / d.lambda, hbar));
            QpsSample {
                t: cs.grid.at(k),
                lambda: d.lambda,
                values,
            }
        })
        .collect();
    if samples.iter().all(QpsSample::is_masked) {
        return Err(Error::AllMasked { epsilon: epsilon_lambda });
    }
    Ok(QpsTrajectory {
        grid: cs.grid,
        hbar,
        epsilon_lambda,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tol: f64,
    pub samples: usize,
    /// Largest `|det - hbar^2/4| / (hbar^2/4)` over unmasked samples.
    pub max_abs_residual: f64,
    pub fraction_within_tol: f64,
    /// Relative residual at the last unmasked sample.
    pub final_residual: Option<f64>,
    pub pass: bool,
    /// Samples rescaled onto `det = hbar^2/4`; `None` entries could not be
    /// projected (masked, or `det <= 0`).
    pub projected: Option<Vec<Option<QpsValues>>>,
}

/// Quantifies how far the covariance history is from minimum uncertainty.
pub fn saturation_audit(traj: &QpsTrajectory, hbar: f64, tol: f64, project: bool) -> AuditReport {
    let residuals: Vec<f64> = traj.unmasked().map(|(_, v)| v.relative_residual(hbar)).collect();
    let n = residuals.len();
    let max_abs_residual = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let within = residuals.iter().filter(|r| r.abs() <= tol).count();
    let projected = project.then(|| {
        traj.samples
            .iter()
            .map(|s| {
                s.values.and_then(|v| {
                    let det = v.p * v.x - v.q * v.q;
                    (det > 0.0).then(|| {
                        let c = (0.25 * hbar * hbar / det).sqrt();
                        QpsValues::new(c * v.p, c * v.x, c * v.q, hbar)
                    })
                })
            })
            .collect()
    });
    AuditReport {
        tol,
        samples: n,
        max_abs_residual,
        fraction_within_tol: if n == 0 { 0.0 } else { within as f64 / n as f64 },
        final_residual: residuals.last().copied(),
        pass: n > 0 && max_abs_residual <= tol,
        projected,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoherenceInterval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSeries {
    /// `exp(-Gamma(t) dx^2)`.
    pub coherence: TimeSeries,
    pub slope: Vec<f64>,
    pub intervals: Vec<RecoherenceInterval>,
}

/// Slope threshold scaled to the series: `1e-9 max|Gamma| / span`.
pub fn default_slope_tolerance(gamma: &TimeSeries) -> f64 {
    let peak = gamma.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let span = gamma.grid.end() - gamma.grid.start();
    1e-9 * peak / span
}

/// Coherence implied by a time-dependent exponent and the maximal runs of
/// samples over which the exponent decreases faster than `slope_tol`.
pub fn gamma_t_series(gamma: &TimeSeries, dx: f64, slope_tol: f64) -> CoherenceSeries {
    let slope = central_differences(&gamma.values, gamma.grid.step());
    let coherence = TimeSeries {
        name: "coherence".into(),
        units: "1".into(),
        grid: gamma.grid,
        values: gamma.values.iter().map(|g| (-g * dx * dx).exp()).collect(),
    };
    let mut intervals = Vec::new();
    let mut open: Option<usize> = None;
    for (k, s) in slope.iter().enumerate() {
        match (*s < -slope_tol, open) {
            (true, None) => open = Some(k),
            (false, Some(start)) => {
                intervals.push(RecoherenceInterval {
                    start: gamma.grid.at(start),
                    end: gamma.grid.at(k - 1),
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        intervals.push(RecoherenceInterval {
            start: gamma.grid.at(start),
            end: gamma.grid.end(),
        });
    }
    CoherenceSeries {
        coherence,
        slope,
        intervals,
    }
}
