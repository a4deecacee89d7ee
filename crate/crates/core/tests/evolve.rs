use nhwork::evolve::*;
use nhwork::model::{build_h0, hamiltonian_at, DriveProfile, LatticeSpec};
use nhwork::oracle::bath_tensor_simulation;
use nhwork::thermal::EnergyBasis;
use nhwork::{CMatrix, C64};

/// Classical fourth-order Runge-Kutta on `dU/dt = -i H(t) U`, no rescaling.
fn rk4_propagator(spec: &LatticeSpec, profile: &DriveProfile, t1: f64, steps: usize) -> CMatrix {
    let n = spec.sites;
    let h = t1 / steps as f64;
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |t: f64, u: &CMatrix| hamiltonian_at(spec, profile, t).unwrap() * u * minus_i;
    let mut u = CMatrix::identity(n, n);
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = rhs(t, &u);
        let k2 = rhs(t + h / 2.0, &(&u + &k1 * C64::from(h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(&u + &k2 * C64::from(h / 2.0)));
        let k4 = rhs(t + h, &(&u + &k3 * C64::from(h)));
        u += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
    }
    u
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn matches_an_independent_integrator() {
    let spec = LatticeSpec::nonreciprocal(4, 1.5, 2.1).with_delta(0.3);
    let profile = DriveProfile::slow(3.0);
    let reference = rk4_propagator(&spec, &profile, 3.0, 30_000);
    let coarse = propagate_protocol(&spec, &profile, 1e-2).unwrap().effective();
    let fine = propagate_protocol(&spec, &profile, 1e-3).unwrap().effective();
    assert!(rel(&coarse, &reference) < 1e-4, "{}", rel(&coarse, &reference));
    assert!(rel(&fine, &reference) < 1e-6, "{}", rel(&fine, &reference));
}

#[test]
fn unitary_in_the_hermitian_limit() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 0.0);
    for profile in [DriveProfile::slow(20.0), DriveProfile::sudden(20.0)] {
        let p = propagate_protocol(&spec, &profile, 1e-2).unwrap();
        assert!(p.log_scale.abs() <= 1e-10);
        let u = p.effective();
        let defect = u.adjoint() * &u - CMatrix::identity(8, 8);
        assert!(defect.iter().all(|z| z.norm() <= 1e-10));
    }
}

#[test]
fn composition_over_a_split_point() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1);
    let profile = DriveProfile::slow(10.0);
    let whole = propagate(&spec, &profile, 0.0, 10.0, 1e-2).unwrap();
    let a = propagate(&spec, &profile, 0.0, 3.7, 1e-2).unwrap();
    let b = propagate(&spec, &profile, 3.7, 10.0, 1e-2).unwrap();
    assert!(relative_distance(&a.then(&b).unwrap(), &whole) < 1e-6);
}

#[test]
fn repeated_rounds_equal_one_long_integration() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 1.5);
    let profile = DriveProfile::slow(4.0).with_rounds(3);
    let composed = propagate_protocol(&spec, &profile, 1e-2).unwrap();
    let direct = propagate(&spec, &profile, 0.0, 12.0, 1e-2).unwrap();
    assert!(relative_distance(&composed, &direct) < 1e-10);
}

#[test]
fn step_halving_converges() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 2.1);
    let (_, err) = step_halving_check(&spec, &DriveProfile::slow(50.0), 1e-2).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn stays_finite_over_the_longest_drives() {
    let spec = LatticeSpec::nonreciprocal(20, 1.5, 2.5);
    for profile in [DriveProfile::sudden(500.0), DriveProfile::slow(500.0)] {
        let p = propagate_protocol(&spec, &profile, 1e-2).unwrap();
        assert!(p.matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        // the raw norm would overflow a double
        assert!(p.log_scale > 100.0, "{}", p.log_scale);
    }
}

#[test]
fn density_populations_match_the_tensor_oracle() {
    // with a maximally mixed start, rho(t_f) in the energy basis has the
    // final marginal of the infinite-temperature transition table
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1);
    let profile = DriveProfile::sudden(4.0);
    let rho0 = CMatrix::identity(6, 6) / C64::from(6.0);
    let rho = evolve_density(&spec, &profile, &rho0, 1e-2).unwrap();
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let frame = basis.to_energy_frame(&rho);
    let table = bath_tensor_simulation(&spec, &profile, 0.0, 1e-2).unwrap();
    for (m, q) in table.final_marginal().iter().enumerate() {
        assert!((frame[(m, m)].re - q).abs() < 1e-10);
    }
    assert!(purity(&rho) > purity(&rho0) + 0.1);
}

#[test]
fn density_input_is_validated() {
    let spec = LatticeSpec::nonreciprocal(4, 1.5, 1.0);
    let profile = DriveProfile::sudden(1.0);
    let not_normalized = CMatrix::identity(4, 4);
    assert!(evolve_density(&spec, &profile, &not_normalized, 1e-2).is_err());
    let mut skew = CMatrix::identity(4, 4) / C64::from(4.0);
    skew[(0, 1)] = C64::new(0.0, 0.1);
    assert!(evolve_density(&spec, &profile, &skew, 1e-2).is_err());
}

#[test]
fn measurement_changes_the_state_past_the_ep() {
    let spec = LatticeSpec::nonreciprocal(4, 1.5, 1.0);
    let (rho, measured) = naive_tpm_state(&spec, &DriveProfile::sudden(2.0), 1.0, 1e-2).unwrap();
    assert!(trace_distance(&rho, &measured) > 1e-3);

    let h = LatticeSpec::nonreciprocal(4, 1.5, 0.0);
    let (rho, measured) = naive_tpm_state(&h, &DriveProfile::sudden(2.0), 1.0, 1e-2).unwrap();
    assert!(trace_distance(&rho, &measured) < 1e-12);
}

#[test]
fn hermitian_chain_has_a_static_hamiltonian() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 0.0);
    let h0 = build_h0(&spec).unwrap();
    let profile = DriveProfile::slow(7.0).with_rounds(2);
    for t in [0.0, 1.3, 3.5, 7.0, 11.2, 14.0] {
        assert_eq!(hamiltonian_at(&spec, &profile, t).unwrap(), h0);
    }
}
