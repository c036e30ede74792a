//! Phase-space description of decoherence for a particle in one dimension.
//!
//! Pointer states are minimum-uncertainty Gaussians labelled by their mean
//! momentum and position. The environment shows up through the variance-
//! covariance matrix they share. This crate builds that matrix from Lindblad
//! couplings ([`markov`]) or from memory kernels ([`nonmarkov`]), evaluates
//! pointer-state overlaps and density elements ([`pointer`]), and treats
//! finite-dimensional system-environment entanglement ([`multilevel`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod markov;
pub mod multilevel;
pub mod nonmarkov;
pub mod phase;
pub mod pointer;
pub mod quadrature;
pub mod series;

pub use error::{Error, Result};
pub use phase::{
    classify_regime, rates_from_samples, CovarianceMatrix, CovarianceRate, PhasePoint, PhysicalConstants, Regime,
};
pub use series::{TimeGrid, TimeSeries};
