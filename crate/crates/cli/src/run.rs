//! Mode drivers: turn a validated configuration into tables and report scalars.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use qps_core::markov::{channel_coefficients_with, coherence_decay, gamma_markov, hamiltonian_coefficients, identify_qps};
use qps_core::multilevel::{
    coherence_norm, decoherence_time, purity, reduced_density, reduced_density_direct, MultilevelModel, OverlapModel,
};
use qps_core::nonmarkov::{
    default_slope_tolerance, gamma_t_series, qps_trajectory, saturation_audit, time_dependent_coefficients_with,
};
use qps_core::pointer::{
    derivative_check, BreathingCovariance, ConstantCovariance, DerivativeSample, HarmonicTrajectory, SampledCovariance,
    StaticTrajectory,
};
use qps_core::{CovarianceMatrix, PhasePoint, Regime, TimeSeries};

use crate::config::{CovarianceConfig, GammaProxy, Mode, OverlapConfig, RunConfig};
use crate::error::CliError;
use crate::table::{Field, Table};

/// Largest relative error accepted by the derivative check.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Saturation {
    Exact(&'static str),
    Surplus { surplus: f64 },
}

impl Saturation {
    pub fn exact() -> Self {
        Saturation::Exact("exact")
    }

    pub fn from_surplus(surplus: Option<f64>) -> Self {
        surplus.map_or(Saturation::exact(), |surplus| Saturation::Surplus { surplus })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceValues {
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionValues {
    #[serde(rename = "D_pp")]
    pub d_pp: f64,
    #[serde(rename = "D_xx")]
    pub d_xx: f64,
    #[serde(rename = "D_px")]
    pub d_px: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

/// Key scalars; every key is always present and `null` when the mode does not produce it.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scalars {
    #[serde(rename = "Gamma")]
    pub gamma: Option<f64>,
    #[serde(rename = "tau_D")]
    pub tau_d: Option<f64>,
    pub max_saturation_residual: Option<f64>,
    pub recoherence_interval_count: Option<usize>,
    pub fd_vs_analytic_max_rel_err: Option<f64>,
    pub saturation: Option<Saturation>,
    pub covariance: Option<CovarianceValues>,
    pub diffusion: Option<DiffusionValues>,
}

/// Everything a run produces besides the files' location.
#[derive(Debug)]
pub struct Outcome {
    pub regime: Option<Regime>,
    pub scalars: Scalars,
    pub details: Map<String, Value>,
    pub tables: Vec<Table>,
    /// Set when the computation finished but failed its own acceptance check.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn new(regime: Option<Regime>) -> Self {
        Self {
            regime,
            scalars: Scalars::default(),
            details: Map::new(),
            tables: Vec::new(),
            failure: None,
        }
    }
}

pub fn execute(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Markov => markov(cfg, log),
        Mode::Nonmarkov => nonmarkov(cfg, log),
        Mode::Multilevel => multilevel(cfg, log),
        Mode::DerivativeCheck => derivative(cfg, log),
    }
}

fn covariance_values(g: &CovarianceMatrix) -> CovarianceValues {
    CovarianceValues {
        p: g.p(),
        x: g.x(),
        q: g.q(),
    }
}

fn markov(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome, CliError> {
    let consts = cfg.constants()?;
    let grid = cfg.time_grid()?;
    let section = cfg.markov_section();
    let d = channel_coefficients_with(&cfg.lindblad_channels()?, consts.hbar, cfg.allow_many_channels)?;
    log(&format!(
        "coefficients: D_pp={} D_xx={} D_px={} Lambda={}",
        d.d_pp, d.d_xx, d.d_px, d.lambda
    ));
    let id = identify_qps(&d, consts.hbar)?;
    let friction = cfg.constants.gamma.unwrap_or(d.lambda);
    let gamma = gamma_markov(&consts, friction)?;
    let h = hamiltonian_coefficients(&id.covariance, &consts, &StaticTrajectory(PhasePoint::ORIGIN), 0.0)?;

    let mut out = Outcome::new(Some(Regime::Markovian));
    out.scalars = Scalars {
        gamma: Some(gamma),
        max_saturation_residual: Some(id.covariance.saturation_residual().abs()),
        saturation: Some(Saturation::from_surplus(id.unsaturated_surplus)),
        covariance: Some(covariance_values(&id.covariance)),
        diffusion: Some(DiffusionValues {
            d_pp: d.d_pp,
            d_xx: d.d_xx,
            d_px: d.d_px,
            lambda: d.lambda,
        }),
        ..Scalars::default()
    };
    out.details.insert("friction".into(), json!(friction));
    out.details.insert("dx".into(), json!(section.dx));
    out.details.insert(
        "hamiltonian".into(),
        json!({"A_pp": h.a_pp, "A_xx": h.a_xx, "A_px": h.a_px}),
    );

    let mut header = vec!["t".to_string()];
    for k in 0..section.dx.len() {
        header.push(format!("rho_{k}_re"));
        header.push(format!("rho_{k}_im"));
    }
    let mut table = Table::with_header("markov_coherence.csv", header);
    let rho0 = Complex64::new(section.rho0[0], section.rho0[1]);
    for t in grid.times() {
        let mut row = vec![Field::Float(t)];
        for &dx in &section.dx {
            let r = coherence_decay(rho0, dx, gamma, t)?;
            row.extend([Field::Float(r.re), Field::Float(r.im)]);
        }
        table.push(row);
    }
    out.tables.push(table);
    Ok(out)
}

fn nonmarkov(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome, CliError> {
    let consts = cfg.constants()?;
    let hbar = consts.hbar;
    let grid = cfg.time_grid()?;
    let s = cfg.nonmarkov_section();
    let specs = cfg.channel_specs()?;
    log(&format!("integrating {} channel(s) on {} points", specs.len(), grid.len()));
    let cs = time_dependent_coefficients_with(&specs, hbar, &grid, s.quadrature_rtol)?;
    log(&format!("largest refinement change {:e}", cs.max_refinement_change));
    let traj = qps_trajectory(&cs, hbar, s.epsilon_lambda)?;
    let audit = saturation_audit(&traj, hbar, s.saturation_tol, s.project);

    let gamma = match s.gamma_proxy {
        GammaProxy::DXx => TimeSeries {
            name: "Gamma".into(),
            ..cs.d_xx.clone()
        },
        GammaProxy::DPpOverHbar2 => TimeSeries {
            name: "Gamma".into(),
            values: cs.d_pp.values.iter().map(|v| v / (hbar * hbar)).collect(),
            ..cs.d_pp.clone()
        },
    };
    let coherence = gamma_t_series(&gamma, s.dx, default_slope_tolerance(&gamma));

    let regime = traj.trailing_regime(grid.end(), s.regime_tol);

    let last = traj.unmasked().last();
    let mut out = Outcome::new(regime);
    let d = cs.last();
    out.scalars = Scalars {
        gamma: gamma.values.last().copied(),
        max_saturation_residual: Some(audit.max_abs_residual),
        recoherence_interval_count: Some(coherence.intervals.len()),
        saturation: audit.final_residual.map(|r| {
            if r.abs() <= s.saturation_tol {
                Saturation::exact()
            } else {
                Saturation::Surplus { surplus: r }
            }
        }),
        covariance: last.map(|(_, v)| CovarianceValues { p: v.p, x: v.x, q: v.q }),
        diffusion: Some(DiffusionValues {
            d_pp: d.d_pp,
            d_xx: d.d_xx,
            d_px: d.d_px,
            lambda: d.lambda,
        }),
        ..Scalars::default()
    };
    let masked = traj.samples.iter().filter(|s| s.is_masked()).count();
    out.details.insert("masked_samples".into(), json!(masked));
    out.details.insert("max_refinement_change".into(), json!(cs.max_refinement_change));
    out.details.insert("gamma_proxy".into(), serde_json::to_value(s.gamma_proxy).unwrap_or(Value::Null));
    out.details.insert(
        "audit".into(),
        json!({
            "tol": audit.tol,
            "samples": audit.samples,
            "fraction_within_tol": audit.fraction_within_tol,
            "final_residual": audit.final_residual,
            "pass": audit.pass,
        }),
    );
    out.details.insert("recoherence_intervals".into(), json!(coherence.intervals));

    let mut header = vec!["t", "D_pp", "D_xx", "D_px", "Lambda", "P", "X", "Q", "det_residual", "masked"];
    if s.project {
        header.extend(["P_projected", "X_projected", "Q_projected"]);
    }
    let mut table = Table::new("nonmarkov.csv", &header);
    for (k, sample) in traj.samples.iter().enumerate() {
        let dk = cs.at(k);
        let v = sample.values;
        let opt = |f: fn(&qps_core::nonmarkov::QpsValues) -> f64| Field::Float(v.as_ref().map_or(f64::NAN, f));
        let mut row = vec![
            Field::Float(sample.t),
            Field::Float(dk.d_pp),
            Field::Float(dk.d_xx),
            Field::Float(dk.d_px),
            Field::Float(dk.lambda),
            opt(|v| v.p),
            opt(|v| v.x),
            opt(|v| v.q),
            opt(|v| v.det_residual),
            Field::Flag(sample.is_masked()),
        ];
        if let Some(projected) = &audit.projected {
            let pv = projected[k];
            let f = |g: fn(&qps_core::nonmarkov::QpsValues) -> f64| Field::Float(pv.as_ref().map_or(f64::NAN, g));
            row.extend([f(|v| v.p), f(|v| v.x), f(|v| v.q)]);
        }
        table.push(row);
    }
    out.tables.push(table);

    let mut table = Table::new("coherence.csv", &["t", "Gamma", "coherence", "slope", "decreasing"]);
    let tol = default_slope_tolerance(&gamma);
    for (k, t) in grid.times().enumerate() {
        table.push(vec![
            Field::Float(t),
            Field::Float(gamma.values[k]),
            Field::Float(coherence.coherence.values[k]),
            Field::Float(coherence.slope[k]),
            Field::Flag(coherence.slope[k] < -tol),
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

fn multilevel(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome, CliError> {
    let grid = cfg.time_grid()?;
    let section = cfg.multilevel.as_ref().ok_or_else(|| CliError::Validation {
        path: "multilevel".into(),
        message: "required in mode multilevel".into(),
    })?;
    let coeffs = section.coefficients();
    let n = coeffs.len();
    let (overlap, horizon) = match section.overlap {
        OverlapConfig::ExponentialDecay { tau_d } => (OverlapModel::ExponentialDecay { tau_d }, section.horizon),
        OverlapConfig::GaussianDecay { tau_d } => (OverlapModel::GaussianDecay { tau_d }, section.horizon),
        OverlapConfig::Constant { value } => {
            let model = OverlapModel::user(move |_| {
                DMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { 1.0 } else { value }, 0.0))
            });
            (model, Some(section.horizon.unwrap_or(grid.end())))
        }
    };
    let model = MultilevelModel::new(coeffs, overlap)?;
    log(&format!("{n} levels, {} time points", grid.len()));

    let mut table = Table::new(
        "multilevel.csv",
        &["t", "coherence_norm", "purity", "min_eigenvalue", "trace_re", "trace_im"],
    );
    let mut max_path_gap = 0.0f64;
    let mut last = None;
    for t in grid.times() {
        let rho = reduced_density(&model, t)?;
        let direct = reduced_density_direct(&model, t)?;
        max_path_gap = max_path_gap.max((&rho.matrix - &direct.matrix).iter().map(|d| d.norm()).fold(0.0, f64::max));
        let tr = rho.trace();
        table.push(vec![
            Field::Float(t),
            Field::Float(coherence_norm(&rho)),
            Field::Float(purity(&rho)),
            Field::Float(rho.min_eigenvalue()),
            Field::Float(tr.re),
            Field::Float(tr.im),
        ]);
        last = Some(rho);
    }
    let mut out = Outcome::new(None);
    out.tables.push(table);
    if let Some(rho) = last {
        let mut table = Table::new("density_final.csv", &["i", "j", "rho_re", "rho_im"]);
        for i in 0..n {
            for j in 0..n {
                let v = rho.matrix[(i, j)];
                table.push(vec![Field::Int(i as i64), Field::Int(j as i64), Field::Float(v.re), Field::Float(v.im)]);
            }
        }
        out.tables.push(table);
    }

    let tau = match decoherence_time(&model, section.threshold, horizon) {
        Ok(t) => Some(t),
        Err(qps_core::Error::NotReached { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    out.scalars.tau_d = tau;
    out.details.insert("threshold".into(), json!(section.threshold));
    out.details.insert("tau_D_reached".into(), json!(tau.is_some()));
    out.details.insert("literal_vs_direct_max_abs_diff".into(), json!(max_path_gap));
    Ok(out)
}

fn derivative(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Outcome, CliError> {
    let consts = cfg.constants()?;
    let grid = cfg.time_grid()?;
    let s = cfg.derivative_section();
    let traj = HarmonicTrajectory {
        amplitude: s.trajectory.amplitude,
        omega: s.trajectory.omega,
        phase: s.trajectory.phase,
        mass: consts.mass,
    };
    let period = traj.period();

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut point = || PhasePoint::new(rng.gen_range(-s.spread..=s.spread), rng.gen_range(-s.spread..=s.spread));
    let pairs: Vec<(PhasePoint, PhasePoint)> = (0..s.pairs).map(|_| (point(), point())).collect();
    // interior grid points, so sampled rates are read on the grid
    let last = grid.len() - 1;
    let times: Vec<f64> = (1..=s.times).map(|i| grid.at(i * last / (s.times + 1))).collect();

    let covariance = s.covariance.clone().unwrap_or(CovarianceConfig::Constant {
        x: 0.5 * consts.hbar,
        q: 0.0,
    });
    let (regime, g0, samples) = match covariance {
        CovarianceConfig::Constant { x, q } => {
            let g = CovarianceMatrix::saturated_from_xq(x, q, consts.hbar)?;
            let profile = ConstantCovariance { g, timescale: period };
            let samples = derivative_check(&pairs, &times, &traj, &profile, &profile, period, Regime::Markovian)?;
            (Regime::Markovian, g, samples)
        }
        CovarianceConfig::Breathing {
            x0,
            x_amplitude,
            q0,
            q_amplitude,
            nu,
        } => {
            let profile = BreathingCovariance::new(x0, x_amplitude, q0, q_amplitude, nu, consts.hbar)?;
            let sampled = SampledCovariance::sample(&profile, grid, period)?;
            let samples = derivative_check(&pairs, &times, &traj, &profile, &sampled, period, Regime::NonMarkovian)?;
            (Regime::NonMarkovian, sampled.samples()[0], samples)
        }
    };
    let worst = samples.iter().map(|s| s.rel_err).fold(0.0, f64::max);
    log(&format!("{} comparisons, worst relative error {worst:e}", samples.len()));

    let mut out = Outcome::new(Some(regime));
    out.scalars.fd_vs_analytic_max_rel_err = Some(worst);
    out.scalars.covariance = Some(covariance_values(&g0));
    out.scalars.saturation = Some(Saturation::exact());
    out.details.insert("tolerance".into(), json!(DERIVATIVE_TOLERANCE));
    out.details.insert("comparisons".into(), json!(samples.len()));
    out.details.insert("period".into(), json!(period));
    out.details.insert("fd_step".into(), json!(1e-5 * period));
    out.tables.push(derivative_table(&samples));
    if !(worst <= DERIVATIVE_TOLERANCE) {
        out.failure = Some(CliError::Numerical(format!(
            "derivative check: worst relative error {worst:e} exceeds {DERIVATIVE_TOLERANCE:e}"
        )));
    }
    Ok(out)
}

fn derivative_table(samples: &[DerivativeSample]) -> Table {
    let mut table = Table::new(
        "derivative_check.csv",
        &[
            "t",
            "z_p",
            "z_x",
            "zp_p",
            "zp_x",
            "rho_re",
            "rho_im",
            "analytic_re",
            "analytic_im",
            "fd_re",
            "fd_im",
            "rel_err",
        ],
    );
    for s in samples {
        table.push(
            [
                s.t,
                s.z.p,
                s.z.x,
                s.z_prime.p,
                s.z_prime.x,
                s.rho.re,
                s.rho.im,
                s.analytic.re,
                s.analytic.im,
                s.finite_difference.re,
                s.finite_difference.im,
                s.rel_err,
            ]
            .into_iter()
            .map(Field::Float)
            .collect(),
        );
    }
    table
}
