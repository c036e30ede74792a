//! Run configuration: JSON document -> validated [`RunConfig`].

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qps_core::markov::{LindbladChannel, MAX_CHANNELS};
use qps_core::nonmarkov::{ChannelSpec, KernelShape, MemoryKernel, DEFAULT_EPSILON_LAMBDA, DEFAULT_QUADRATURE_RTOL};
use qps_core::{PhysicalConstants, TimeGrid, TimeSeries};

use crate::error::CliError;

pub const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Markov,
    Nonmarkov,
    Multilevel,
    DerivativeCheck,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Markov => "markov",
            Mode::Nonmarkov => "nonmarkov",
            Mode::Multilevel => "multilevel",
            Mode::DerivativeCheck => "derivative-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "gnuplot" => Ok(Format::Gnuplot),
            other => Err(format!("unknown format `{other}`, expected csv, json or gnuplot")),
        }
    }
}

/// A complex number written as `[re, im]`.
pub type ComplexPair = [f64; 2];

fn complex(v: ComplexPair) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(rename = "kT", default = "one")]
    pub k_t: f64,
    /// Friction constant entering the position-decoherence rate; the
    /// channels' friction is used when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            k_t: 1.0,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential {
        #[serde(default = "one")]
        amplitude: f64,
        tau_c: f64,
    },
    DampedOscillatory {
        #[serde(default = "one")]
        amplitude: f64,
        tau_c: f64,
        omega0: f64,
    },
    NarrowDelta {
        #[serde(default = "one")]
        weight: f64,
        width: f64,
    },
    /// Samples at `0, step, 2 step, ...`.
    Tabulated { step: f64, values: Vec<f64> },
}

impl KernelConfig {
    fn shape(&self) -> Result<KernelShape, String> {
        Ok(match self {
            KernelConfig::Exponential { amplitude, tau_c } => KernelShape::Exponential {
                amplitude: *amplitude,
                tau_c: *tau_c,
            },
            KernelConfig::DampedOscillatory {
                amplitude,
                tau_c,
                omega0,
            } => KernelShape::DampedOscillatory {
                amplitude: *amplitude,
                tau_c: *tau_c,
                omega0: *omega0,
            },
            KernelConfig::NarrowDelta { weight, width } => KernelShape::NarrowDelta {
                weight: *weight,
                width: *width,
            },
            KernelConfig::Tabulated { step, values } => {
                if values.len() < 2 {
                    return Err("a tabulated kernel needs at least two samples".into());
                }
                if !(*step > 0.0 && step.is_finite()) {
                    return Err(format!("step must be positive, got {step}"));
                }
                let grid = TimeGrid::span(0.0, step * (values.len() - 1) as f64, values.len()).map_err(|e| e.to_string())?;
                let series = TimeSeries::new("kernel", "1", grid, values.clone()).map_err(|e| e.to_string())?;
                KernelShape::Tabulated { series }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub a: ComplexPair,
    pub b: ComplexPair,
    #[serde(default)]
    pub noise: Option<KernelConfig>,
    #[serde(default)]
    pub dissipation: Option<KernelConfig>,
    /// Mode frequency of the channel (memory kernels only).
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    /// Separations at which the coherence decay is tabulated.
    #[serde(default = "default_dx")]
    pub dx: Vec<f64>,
    /// Initial off-diagonal element.
    #[serde(default = "default_rho0")]
    pub rho0: ComplexPair,
}

fn default_dx() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_rho0() -> ComplexPair {
    [1.0, 0.0]
}

impl Default for MarkovSection {
    fn default() -> Self {
        Self {
            dx: default_dx(),
            rho0: default_rho0(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaProxy {
    /// `Gamma(t) = D_xx(t)`.
    DXx,
    /// `Gamma(t) = D_pp(t) / hbar^2`.
    DPpOverHbar2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonmarkovSection {
    #[serde(default = "default_epsilon")]
    pub epsilon_lambda: f64,
    #[serde(default = "default_rtol")]
    pub quadrature_rtol: f64,
    #[serde(default = "default_proxy")]
    pub gamma_proxy: GammaProxy,
    #[serde(default = "one")]
    pub dx: f64,
    #[serde(default = "default_tol")]
    pub saturation_tol: f64,
    #[serde(default)]
    pub project: bool,
    /// Relative-rate tolerance for the stationary classification.
    #[serde(default = "default_tol")]
    pub regime_tol: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON_LAMBDA
}

fn default_rtol() -> f64 {
    DEFAULT_QUADRATURE_RTOL
}

fn default_proxy() -> GammaProxy {
    GammaProxy::DXx
}

fn default_tol() -> f64 {
    1e-6
}

impl Default for NonmarkovSection {
    fn default() -> Self {
        Self {
            epsilon_lambda: default_epsilon(),
            quadrature_rtol: default_rtol(),
            gamma_proxy: default_proxy(),
            dx: 1.0,
            saturation_tol: default_tol(),
            project: false,
            regime_tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OverlapConfig {
    ExponentialDecay { tau_d: f64 },
    GaussianDecay { tau_d: f64 },
    /// Off-diagonal overlaps frozen at `value`.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilevelSection {
    pub coefficients: Vec<ComplexPair>,
    pub overlap: OverlapConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_threshold() -> f64 {
    (-1.0f64).exp()
}

impl MultilevelSection {
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.coefficients.iter().copied().map(complex).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            omega: 1.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceConfig {
    /// Time-independent `G` with `P` fixed by saturation.
    Constant { x: f64, q: f64 },
    /// `X = x0 (1 + x_amplitude sin(nu t))`, `Q = q0 + q_amplitude cos(nu t)`.
    Breathing {
        x0: f64,
        x_amplitude: f64,
        q0: f64,
        q_amplitude: f64,
        nu: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeCheckSection {
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub covariance: Option<CovarianceConfig>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_times")]
    pub times: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Half-width of the square the random `(z, z')` pairs are drawn from.
    #[serde(default = "default_spread")]
    pub spread: f64,
}

fn default_pairs() -> usize {
    8
}

fn default_times() -> usize {
    16
}

fn default_seed() -> u64 {
    7
}

fn default_spread() -> f64 {
    2.0
}

impl Default for DerivativeCheckSection {
    fn default() -> Self {
        Self {
            trajectory: TrajectoryConfig::default(),
            covariance: None,
            pairs: default_pairs(),
            times: default_times(),
            seed: default_seed(),
            spread: default_spread(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub constants: Constants,
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub allow_many_channels: bool,
    #[serde(default)]
    pub markov: Option<MarkovSection>,
    #[serde(default)]
    pub nonmarkov: Option<NonmarkovSection>,
    #[serde(default)]
    pub multilevel: Option<MultilevelSection>,
    #[serde(default)]
    pub derivative_check: Option<DerivativeCheckSection>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parsed document plus the typed configuration read from it.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub document: serde_json::Value,
}

/// Parses and validates a JSON run configuration.
///
/// Malformed JSON is a [`CliError::Parse`]; missing, unknown or out-of-range
/// keys are a [`CliError::Validation`] carrying the key path.
pub fn parse_config(text: &str) -> Result<ParsedConfig, CliError> {
    let document: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let config: RunConfig = serde_path_to_error::deserialize(&document).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(ParsedConfig { config, document })
}

impl RunConfig {
    pub fn constants(&self) -> Result<PhysicalConstants, CliError> {
        let c = &self.constants;
        PhysicalConstants::new(c.hbar, c.mass, c.k_t).map_err(|e| invalid("constants", e.to_string()))
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        if !(self.grid.t_end > 0.0 && self.grid.t_end.is_finite()) {
            return Err(invalid("grid.t_end", format!("must be positive, got {}", self.grid.t_end)));
        }
        if self.grid.n_points < MIN_POINTS {
            return Err(invalid(
                "grid.n_points",
                format!("must be at least {MIN_POINTS}, got {}", self.grid.n_points),
            ));
        }
        TimeGrid::new(self.grid.t_end, self.grid.n_points).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn lindblad_channels(&self) -> Result<Vec<LindbladChannel>, CliError> {
        if self.channels.is_empty() {
            return Err(invalid("channels", "at least one channel is required"));
        }
        if !self.allow_many_channels && self.channels.len() > MAX_CHANNELS {
            return Err(invalid(
                "channels",
                format!(
                    "{} channels given, at most {MAX_CHANNELS} without allow_many_channels",
                    self.channels.len()
                ),
            ));
        }
        self.channels
            .iter()
            .enumerate()
            .map(|(i, c)| LindbladChannel::new(complex(c.a), complex(c.b)).map_err(|e| invalid(format!("channels[{i}]"), e.to_string())))
            .collect()
    }

    /// Channels with their memory kernels (nonmarkov mode).
    pub fn channel_specs(&self) -> Result<Vec<ChannelSpec>, CliError> {
        let channels = self.lindblad_channels()?;
        channels
            .into_iter()
            .zip(&self.channels)
            .enumerate()
            .map(|(i, (channel, cfg))| {
                let kernel = |name: &str, k: &Option<KernelConfig>, make: fn(KernelShape) -> qps_core::Result<MemoryKernel>| {
                    let path = format!("channels[{i}].{name}");
                    let k = k.as_ref().ok_or_else(|| invalid(&path, "required in nonmarkov mode"))?;
                    let shape = k.shape().map_err(|m| invalid(&path, m))?;
                    make(shape).map_err(|e| invalid(&path, e.to_string()))
                };
                let noise = kernel("noise", &cfg.noise, MemoryKernel::noise)?;
                let dissipation = kernel("dissipation", &cfg.dissipation, MemoryKernel::dissipation)?;
                let omega = cfg
                    .omega
                    .ok_or_else(|| invalid(format!("channels[{i}].omega"), "required in nonmarkov mode"))?;
                ChannelSpec::new(channel, noise, dissipation, omega).map_err(|e| invalid(format!("channels[{i}]"), e.to_string()))
            })
            .collect()
    }

    pub fn markov_section(&self) -> MarkovSection {
        self.markov.clone().unwrap_or_default()
    }

    pub fn nonmarkov_section(&self) -> NonmarkovSection {
        self.nonmarkov.clone().unwrap_or_default()
    }

    pub fn derivative_section(&self) -> DerivativeCheckSection {
        self.derivative_check.clone().unwrap_or_default()
    }

    fn validate(&self) -> Result<(), CliError> {
        self.constants()?;
        self.time_grid()?;
        if let Some(g) = self.constants.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid("constants.gamma", format!("must be positive, got {g}")));
            }
        }
        let foreign = [
            ("markov", self.markov.is_some(), Mode::Markov),
            ("nonmarkov", self.nonmarkov.is_some(), Mode::Nonmarkov),
            ("multilevel", self.multilevel.is_some(), Mode::Multilevel),
            ("derivative_check", self.derivative_check.is_some(), Mode::DerivativeCheck),
        ];
        for (key, present, mode) in foreign {
            if present && mode != self.mode {
                return Err(invalid(key, format!("section only applies to mode {}", mode.as_str())));
            }
        }
        match self.mode {
            Mode::Markov => {
                self.lindblad_channels()?;
                for (i, c) in self.channels.iter().enumerate() {
                    if c.noise.is_some() || c.dissipation.is_some() || c.omega.is_some() {
                        return Err(invalid(format!("channels[{i}]"), "memory kernels only apply to mode nonmarkov"));
                    }
                }
                let m = self.markov_section();
                if let Some(k) = m.dx.iter().position(|d| !d.is_finite()) {
                    return Err(invalid(format!("markov.dx[{k}]"), "must be finite"));
                }
            }
            Mode::Nonmarkov => {
                self.channel_specs()?;
                let s = self.nonmarkov_section();
                for (key, v) in [
                    ("nonmarkov.epsilon_lambda", s.epsilon_lambda),
                    ("nonmarkov.quadrature_rtol", s.quadrature_rtol),
                    ("nonmarkov.saturation_tol", s.saturation_tol),
                    ("nonmarkov.regime_tol", s.regime_tol),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(invalid(key, format!("must be positive, got {v}")));
                    }
                }
            }
            Mode::Multilevel => {
                if !self.channels.is_empty() {
                    return Err(invalid("channels", "channels do not apply to mode multilevel"));
                }
                let m = self.multilevel.as_ref().ok_or_else(|| invalid("multilevel", "required in mode multilevel"))?;
                if !(m.threshold > 0.0 && m.threshold <= 1.0) {
                    return Err(invalid("multilevel.threshold", format!("must be in (0, 1], got {}", m.threshold)));
                }
                if let OverlapConfig::Constant { value } = m.overlap {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(invalid("multilevel.overlap.value", format!("must be in [0, 1], got {value}")));
                    }
                }
            }
            Mode::DerivativeCheck => {
                if !self.channels.is_empty() {
                    return Err(invalid("channels", "channels do not apply to mode derivative-check"));
                }
                let d = self.derivative_section();
                if d.pairs == 0 {
                    return Err(invalid("derivative_check.pairs", "must be at least 1"));
                }
                if d.times == 0 || d.times + 2 > self.grid.n_points {
                    return Err(invalid("derivative_check.times", "must be between 1 and grid.n_points - 2"));
                }
                if !(d.trajectory.omega > 0.0) {
                    return Err(invalid("derivative_check.trajectory.omega", "must be positive"));
                }
                if !(d.spread > 0.0) {
                    return Err(invalid("derivative_check.spread", "must be positive"));
                }
            }
        }
        Ok(())
    }
}
