//! Pointer states, their overlaps, and the density element of a moving
//! pointer-like state with its logarithmic time derivative.

mod density;
mod state;
mod trajectory;

pub use density::{
    derivative_check, finite_difference_rate, log_rates, rho_element, rho_on_trajectory, rho_time_derivative,
    DensityElement, DerivativeSample, LogRates,
};
pub use state::{overlap_oracle, PointerState};
pub use trajectory::{
    BreathingCovariance, ConstantCovariance, CovarianceProfile, HarmonicTrajectory, PhaseTrajectory,
    SampledCovariance, SampledTrajectory, StaticTrajectory,
};
