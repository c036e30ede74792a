use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{CovarianceMatrix, PhasePoint};
use crate::quadrature::trapezoid_doubling;

/// Minimum-uncertainty Gaussian centred at `point` with covariance `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerState {
    point: PhasePoint,
    g: CovarianceMatrix,
}

impl PointerState {
    pub fn new(point: PhasePoint, g: CovarianceMatrix) -> Result<Self> {
        if !g.is_saturated() {
            return Err(Error::NotSaturated {
                det: g.det(),
                bound: 0.25 * g.hbar() * g.hbar(),
            });
        }
        if !point.p.is_finite() || !point.x.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite phase point {point:?}")));
        }
        Ok(Self { point, g })
    }

    pub fn point(&self) -> PhasePoint {
        self.point
    }

    pub fn covariance(&self) -> &CovarianceMatrix {
        &self.g
    }

    /// Position standard deviation `sqrt(X)`.
    pub fn width(&self) -> f64 {
        self.g.x().sqrt()
    }

    /// Eigenvalue `<p> - (2i/hbar) B <x>` of the lowering-type operator the state diagonalizes.
    pub fn label(&self) -> Complex64 {
        let b = self.g.b_parameter();
        Complex64::new(self.point.p, 0.0) - Complex64::new(0.0, 2.0 / self.g.hbar()) * b * self.point.x
    }

    /// Coordinate-space amplitude `<x|z>`.
    pub fn wavefunction(&self, x: f64) -> Complex64 {
        let h = self.g.hbar();
        let norm = (2.0 * PI * self.g.x()).powf(-0.25);
        let d = x - self.point.x;
        let exponent = -self.g.b_parameter() * (d * d / (h * h)) + Complex64::new(0.0, self.point.p * x / h);
        exponent.exp() * norm
    }

    /// Closed-form `<self|other>` from the Gaussian integral of the two amplitudes.
    ///
    /// Valid for any pair of states sharing `hbar`, including different covariances.
    pub fn overlap(&self, other: &PointerState) -> Result<Complex64> {
        let h = self.g.hbar();
        if h != other.g.hbar() {
            return Err(Error::HbarMismatch(h, other.g.hbar()));
        }
        let c1 = self.g.b_parameter().conj() / (h * h);
        let c2 = other.g.b_parameter() / (h * h);
        let (x1, x2) = (self.point.x, other.point.x);
        // Expand around the midpoint to keep the quadratic terms small.
        let m = 0.5 * (x1 + x2);
        let (u1, u2) = (x1 - m, x2 - m);
        let k = (other.point.p - self.point.p) / h;
        let a = c1 + c2;
        let lin = (c1 * u1 + c2 * u2) * 2.0 + Complex64::new(0.0, k);
        let exponent = lin * lin / (a * 4.0) - c1 * (u1 * u1) - c2 * (u2 * u2) + Complex64::new(0.0, k * m);
        let norm = (2.0 * PI * self.g.x()).powf(-0.25) * (2.0 * PI * other.g.x()).powf(-0.25);
        Ok((Complex64::new(PI, 0.0) / a).sqrt() * exponent.exp() * norm)
    }
}

/// Panels used for the first oracle pass.
const ORACLE_INITIAL_PANELS: usize = 1 << 10;
const ORACLE_MAX_PANELS: usize = 1 << 22;
/// Accepted final doubling shift.
const ORACLE_SHIFT_LIMIT: f64 = 1e-7;
/// Results smaller than this are Gaussian tails and reported as zero.
const ORACLE_ZERO: f64 = 1e-100;

/// `<s1|s2>` by trapezoid quadrature of `conj(psi_1) psi_2` over both centres +- 12 widths.
///
/// Independent of [`PointerState::overlap`]; used to check the closed forms.
pub fn overlap_oracle(s1: &PointerState, s2: &PointerState) -> Result<Complex64> {
    if s1.g.hbar() != s2.g.hbar() {
        return Err(Error::HbarMismatch(s1.g.hbar(), s2.g.hbar()));
    }
    let lo = (s1.point.x - 12.0 * s1.width()).min(s2.point.x - 12.0 * s2.width());
    let hi = (s1.point.x + 12.0 * s1.width()).max(s2.point.x + 12.0 * s2.width());
    let r = trapezoid_doubling(
        |x| s1.wavefunction(x).conj() * s2.wavefunction(x),
        lo,
        hi,
        ORACLE_INITIAL_PANELS,
        ORACLE_MAX_PANELS,
        1e-12,
        f64::MIN_POSITIVE,
    );
    let shift = (r.value - r.previous).norm();
    if shift > ORACLE_SHIFT_LIMIT {
        return Err(Error::GridTooCoarse { shift });
    }
    if r.value.norm() < ORACLE_ZERO {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(x: f64, q: f64) -> CovarianceMatrix {
        CovarianceMatrix::saturated_from_xq(x, q, 1.0).unwrap()
    }

    #[test]
    fn rejects_unsaturated_covariance() {
        let g = CovarianceMatrix::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            PointerState::new(PhasePoint::ORIGIN, g),
            Err(Error::NotSaturated { .. })
        ));
    }

    #[test]
    fn peak_modulus() {
        let s = PointerState::new(PhasePoint::new(0.7, -1.2), g(0.5, 0.3)).unwrap();
        let peak = s.wavefunction(-1.2).norm();
        assert!((peak - (2.0 * PI * 0.5f64).powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn modulus_is_even_without_covariance() {
        let s = PointerState::new(PhasePoint::new(1.3, 0.4), g(0.8, 0.0)).unwrap();
        for d in [0.1, 0.5, 1.7, 3.0] {
            assert!((s.wavefunction(0.4 + d).norm() - s.wavefunction(0.4 - d).norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn self_overlap_is_one() {
        let s = PointerState::new(PhasePoint::new(0.3, 0.2), g(0.5, 0.4)).unwrap();
        let o = overlap_oracle(&s, &s).unwrap();
        assert!((o - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!((s.overlap(&s).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn position_offset_overlap_modulus() {
        let x = 0.5;
        for d in [0.3, 1.0, 2.5] {
            let s1 = PointerState::new(PhasePoint::new(0.0, 0.0), g(x, 0.0)).unwrap();
            let s2 = PointerState::new(PhasePoint::new(0.0, d), g(x, 0.0)).unwrap();
            let expected = (-d * d / (8.0 * x)).exp();
            assert!((overlap_oracle(&s1, &s2).unwrap().norm() - expected).abs() < 1e-12);
            assert!((s1.overlap(&s2).unwrap().norm() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn separated_states_have_zero_overlap() {
        let x = 0.5;
        let s1 = PointerState::new(PhasePoint::ORIGIN, g(x, 0.0)).unwrap();
        let s2 = PointerState::new(PhasePoint::new(0.0, 50.0 * x.sqrt()), g(x, 0.0)).unwrap();
        assert_eq!(overlap_oracle(&s1, &s2).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hbar_mismatch_is_rejected() {
        let s1 = PointerState::new(PhasePoint::ORIGIN, g(0.5, 0.0)).unwrap();
        let g2 = CovarianceMatrix::saturated_from_xq(0.5, 0.0, 2.0).unwrap();
        let s2 = PointerState::new(PhasePoint::ORIGIN, g2).unwrap();
        assert!(matches!(overlap_oracle(&s1, &s2), Err(Error::HbarMismatch(..))));
    }

    #[test]
    fn label_matches_eigenvalue_definition() {
        let s = PointerState::new(PhasePoint::new(0.5, 2.0), g(1.0, 0.5)).unwrap();
        // B = 0.25 - 0.25i, so <z> = 0.5 - 2i * (0.25 - 0.25i) * 2 = -0.5 - i
        let z = s.label();
        assert!((z - Complex64::new(-0.5, -1.0)).norm() < 1e-15);
    }
}
