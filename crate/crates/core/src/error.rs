use thiserror::Error;

/// Errors raised by the phase-space, engine and multilevel routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("uncertainty relation violated: det = {det} < hbar^2/4 = {bound}")]
    UncertaintyViolation { det: f64, bound: f64 },

    #[error("covariance matrix is singular (det = {det})")]
    SingularMatrix { det: f64 },

    #[error("covariance matrix is not saturated: det = {det}, hbar^2/4 = {bound}")]
    NotSaturated { det: f64, bound: f64 },

    #[error("states carry different hbar ({0} vs {1})")]
    HbarMismatch(f64, f64),

    #[error("quadrature grid too coarse: refinement shifted the result by {shift:e}")]
    GridTooCoarse { shift: f64 },

    #[error("regime is Markovian but the covariance rate is nonzero")]
    RegimeMismatch,

    #[error("time {t} is not on the trajectory grid")]
    OffGrid { t: f64 },

    #[error("friction coefficient must be positive for the identification, got {lambda}")]
    FrictionNonpositive { lambda: f64 },

    #[error("expected between 1 and {max} channels, got {got}")]
    ChannelCount { got: usize, max: usize },

    #[error("channel has a = b = 0")]
    NullChannel,

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("negative kernel lag {0}")]
    NegativeLag(f64),

    #[error("kernel with role {found:?} supplied where {expected:?} is required")]
    KernelRole {
        expected: crate::nonmarkov::KernelRole,
        found: crate::nonmarkov::KernelRole,
    },

    #[error("quadrature did not converge on [{t0}, {t1}] (last change {change:e})")]
    QuadratureNotConverged { t0: f64, t1: f64, change: f64 },

    #[error("every sample has |Lambda| <= {epsilon}")]
    AllMasked { epsilon: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid overlap matrix at t = {t}: {reason}")]
    InvalidOverlap { t: f64, reason: String },

    #[error("state coefficients not normalized (sum |C|^2 = {0})")]
    NotNormalized(f64),

    #[error("dimension {got} outside 1..={max}")]
    Dimension { got: usize, max: usize },

    #[error("coherence never fell below {threshold} within horizon {horizon}")]
    NotReached { threshold: f64, horizon: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}
