use num_complex::Complex64;
use proptest::prelude::*;
use qps_core::phase::{CovarianceMatrix, CovarianceRate, PhasePoint, Regime};
use qps_core::pointer::{
    overlap_oracle, rho_element, rho_time_derivative, BreathingCovariance, ConstantCovariance, CovarianceProfile,
    HarmonicTrajectory, PhaseTrajectory, PointerState, SampledCovariance,
};
use qps_core::TimeGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state(p: f64, x: f64, g: CovarianceMatrix) -> PointerState {
    PointerState::new(PhasePoint::new(p, x), g).unwrap()
}

#[test]
fn wavefunction_is_normalized() {
    let g = CovarianceMatrix::saturated_from_xq(0.5, 0.0, 1.0).unwrap();
    let s = state(0.0, 0.0, g);
    let sigma = 0.5f64.sqrt();
    let (a, b, n) = (-12.0 * sigma, 12.0 * sigma, 1 << 12);
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (s.wavefunction(a).norm_sqr() + s.wavefunction(b).norm_sqr());
    for k in 1..n {
        sum += s.wavefunction(a + k as f64 * h).norm_sqr();
    }
    assert!((sum * h - 1.0).abs() < 1e-8);
}

#[test]
fn state_is_an_eigenstate_of_the_labelling_operator() {
    // (-i hbar d/dx - (2i/hbar) B x) psi = <z> psi, checked with central differences
    let hbar = 0.7;
    let g = CovarianceMatrix::saturated_from_xq(0.9, -0.3, hbar).unwrap();
    let s = state(0.4, -0.6, g);
    let b = g.b_parameter();
    let h = 1e-5;
    for x in [-1.5, -0.6, 0.0, 0.8] {
        let psi = s.wavefunction(x);
        let dpsi = (s.wavefunction(x + h) - s.wavefunction(x - h)) / (2.0 * h);
        let lhs = Complex64::new(0.0, -hbar) * dpsi - Complex64::new(0.0, 2.0 / hbar) * b * x * psi;
        assert!((lhs / psi - s.label()).norm() < 1e-8, "x = {x}");
    }
}

#[test]
fn moments_match_the_covariance_matrix() {
    // <x>, <p>, X, P and Q by quadrature with finite-difference momentum
    let hbar = 1.0;
    let g = CovarianceMatrix::saturated_from_xq(0.6, 0.35, hbar).unwrap();
    let s = state(0.8, 0.2, g);
    let (a, b, n) = (0.2 - 10.0, 0.2 + 10.0, 1 << 14);
    let dx = (b - a) / n as f64;
    let (mut mx, mut mxx, mut mp, mut mpp, mut mpx) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..=n {
        let x = a + k as f64 * dx;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let psi = s.wavefunction(x);
        let hh = 1e-4;
        let d1 = (s.wavefunction(x + hh) - s.wavefunction(x - hh)) / (2.0 * hh);
        let d2 = (s.wavefunction(x + hh) - psi * 2.0 + s.wavefunction(x - hh)) / (hh * hh);
        let rho = psi.norm_sqr();
        mx += w * rho * x;
        mxx += w * rho * x * x;
        // p psi = -i hbar psi'
        let p_psi = Complex64::new(0.0, -hbar) * d1;
        mp += w * (psi.conj() * p_psi).re;
        mpp += w * (-(psi.conj() * d2) * hbar * hbar).re;
        // (xp + px)/2 = x p - i hbar / 2
        mpx += w * ((psi.conj() * p_psi * x).re);
    }
    let (mx, mxx, mp, mpp, mpx) = (mx * dx, mxx * dx, mp * dx, mpp * dx, mpx * dx);
    assert!((mx - 0.2).abs() < 1e-9);
    assert!((mp - 0.8).abs() < 1e-7);
    assert!((mxx - mx * mx - g.x()).abs() < 1e-9);
    assert!((mpp - mp * mp - g.p()).abs() < 1e-5);
    assert!((mpx - mp * mx - g.q()).abs() < 1e-7);
}

#[test]
fn closed_form_overlap_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let hbar = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let g1 = CovarianceMatrix::saturated_from_xq(rng.gen_range(0.2..3.0), rng.gen_range(-1.0..1.0), hbar).unwrap();
        let g2 = CovarianceMatrix::saturated_from_xq(rng.gen_range(0.2..3.0), rng.gen_range(-1.0..1.0), hbar).unwrap();
        let s1 = state(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), g1);
        let s2 = state(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), g2);
        let quad = overlap_oracle(&s1, &s2).unwrap();
        let closed = s1.overlap(&s2).unwrap();
        assert!((quad - closed).norm() <= 1e-9 * quad.norm().max(1e-6), "{quad} vs {closed}");
        assert!(quad.norm() <= 1.0 + 1e-8);
    }
}

#[test]
fn density_element_matches_oracle_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let g = CovarianceMatrix::saturated_from_xq(rng.gen_range(0.2..2.0), rng.gen_range(-0.8..0.8), 1.0).unwrap();
        let mut pt = || PhasePoint::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let (z, zp, z0) = (pt(), pt(), pt());
        let (sz, szp, sz0) = (
            PointerState::new(z, g).unwrap(),
            PointerState::new(zp, g).unwrap(),
            PointerState::new(z0, g).unwrap(),
        );
        let oracle = overlap_oracle(&sz, &sz0).unwrap() * overlap_oracle(&sz0, &szp).unwrap();
        let closed = rho_element(z, zp, z0, &g).unwrap().value;
        assert!((oracle - closed).norm() <= 1e-6 * oracle.norm(), "{oracle} vs {closed}");
    }
}

#[test]
fn oracle_factorization_of_the_modulus() {
    let g = CovarianceMatrix::new(0.5, 0.5, 0.0, 1.0).unwrap();
    for d in [0.2, 0.7, 1.4] {
        let z = PhasePoint::new(0.0, d);
        let zp = PhasePoint::new(0.0, -d);
        let s0 = PointerState::new(PhasePoint::ORIGIN, g).unwrap();
        let a = overlap_oracle(&PointerState::new(z, g).unwrap(), &s0).unwrap();
        let b = overlap_oracle(&s0, &PointerState::new(zp, g).unwrap()).unwrap();
        let el = rho_element(z, zp, PhasePoint::ORIGIN, &g).unwrap();
        assert!((el.value.norm() - a.norm() * b.norm()).abs() < 1e-12);
    }
}

/// Independent central difference of the closed-form element along the path.
fn fd(
    z: PhasePoint,
    zp: PhasePoint,
    traj: &HarmonicTrajectory,
    profile: &impl CovarianceProfile,
    t: f64,
    h: f64,
) -> Complex64 {
    let at = |s: f64| rho_element(z, zp, traj.state(s).unwrap(), &profile.covariance(s).unwrap()).unwrap().value;
    (at(t + h) - at(t - h)) / (2.0 * h)
}

#[test]
fn markovian_derivative_matches_finite_differences() {
    let traj = HarmonicTrajectory::default();
    let period = traj.period();
    let g = CovarianceMatrix::new(0.5, 0.5, 0.0, 1.0).unwrap();
    let profile = ConstantCovariance { g, timescale: period };
    let zero = CovarianceRate::zero(period);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let t = rng.gen_range(0.0..period);
        let z = PhasePoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let zp = PhasePoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let analytic = rho_time_derivative(z, zp, &traj, &g, &zero, t, Regime::Markovian).unwrap();
        let numeric = fd(z, zp, &traj, &profile, t, 1e-5 * period);
        let rho = rho_element(z, zp, traj.state(t).unwrap(), &g).unwrap().value;
        let scale = numeric.norm().max(rho.norm() / period);
        assert!((analytic - numeric).norm() <= 1e-4 * scale);
    }
}

#[test]
fn reactive_derivative_matches_finite_differences_with_sampled_rates() {
    let traj = HarmonicTrajectory::default();
    let period = traj.period();
    let profile = BreathingCovariance::new(0.5, 0.3, 0.1, 0.25, 1.7, 1.0).unwrap();
    let grid = TimeGrid::new(period, 4097).unwrap();
    let sampled = SampledCovariance::sample(&profile, grid, period).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let t = grid.at(rng.gen_range(1..grid.len() - 1));
        let z = PhasePoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let zp = PhasePoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let g = sampled.covariance(t).unwrap();
        let g_dot = sampled.rate(t).unwrap();
        assert!(!g_dot.is_zero());
        let analytic = rho_time_derivative(z, zp, &traj, &g, &g_dot, t, Regime::NonMarkovian).unwrap();
        let numeric = fd(z, zp, &traj, &profile, t, 1e-5 * period);
        let rho = rho_element(z, zp, traj.state(t).unwrap(), &g).unwrap().value;
        let scale = numeric.norm().max(rho.norm() / period);
        assert!((analytic - numeric).norm() <= 1e-4 * scale);
    }
}

#[test]
fn markovian_formula_misses_the_reactive_terms() {
    // dropping the dG^-1 terms must be visible when G moves
    let traj = HarmonicTrajectory::default();
    let period = traj.period();
    let profile = BreathingCovariance::new(0.5, 0.4, 0.0, 0.3, 2.0, 1.0).unwrap();
    let t = 0.9;
    let (z, zp) = (PhasePoint::new(0.8, -0.9), PhasePoint::new(-0.7, 1.1));
    let g = profile.covariance(t).unwrap();
    let g_dot = profile.rate(t).unwrap();
    let numeric = fd(z, zp, &traj, &profile, t, 1e-5 * period);
    let full = rho_time_derivative(z, zp, &traj, &g, &g_dot, t, Regime::NonMarkovian).unwrap();
    let frozen = rho_time_derivative(z, zp, &traj, &g, &CovarianceRate::zero(period), t, Regime::Markovian).unwrap();
    assert!((full - numeric).norm() < 1e-6 * numeric.norm());
    assert!((frozen - numeric).norm() > 1e-2 * numeric.norm());
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(p, x)| PhasePoint::new(p, x))
}

proptest! {
    #[test]
    fn element_is_bounded_and_hermitian(
        z in point(), zp in point(), z0 in point(), x in 0.1f64..3.0, q in -1.0f64..1.0, hbar in 0.5f64..2.0
    ) {
        let g = CovarianceMatrix::saturated_from_xq(x, q, hbar).unwrap();
        let a = rho_element(z, zp, z0, &g).unwrap().value;
        let b = rho_element(zp, z, z0, &g).unwrap().value;
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!((a - b.conj()).norm() <= 1e-14);
    }

    #[test]
    fn element_is_one_only_on_the_state(z0 in point(), dz in point(), x in 0.1f64..3.0) {
        prop_assume!(dz.p.abs() + dz.x.abs() > 1e-3);
        let g = CovarianceMatrix::saturated_from_xq(x, 0.2, 1.0).unwrap();
        let on = rho_element(z0, z0, z0, &g).unwrap().value;
        prop_assert!((on - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let off = PhasePoint::new(z0.p + dz.p, z0.x + dz.x);
        prop_assert!(rho_element(off, z0, z0, &g).unwrap().value.norm() < 1.0);
    }
}
