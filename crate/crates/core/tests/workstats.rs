use nhwork::evolve::{propagate_protocol, ScaledPropagator};
use nhwork::model::{DriveProfile, LatticeSpec};
use nhwork::spectral::{diagonalize, TOL_IMAG};
use nhwork::thermal::{gibbs_weights, EnergyBasis};
use nhwork::workstats::*;
use nhwork::{CMatrix, C64};

// Dimer g1 = 1, gamma = 1, sudden drive of length 1, beta = 1. Reference
// values from the 2x2 closed form evaluated at 40 significant digits.
const DIMER_TABLE: [[f64; 2]; 2] = [
    [0.757_951_155_980_761_8, 0.016_625_387_647_943_147],
    [0.122_845_921_997_120_6, 0.102_577_534_374_174_41],
];
const DIMER_LOG_NORM: f64 = 0.327_036_559_968_096_8;

/// `exp(-i H T)` for `H = [[0, 1 + g/2], [1 - g/2, 0]]`, using `H^2 = w^2 I`.
fn dimer_propagator(gamma: f64, t: f64) -> [[C64; 2]; 2] {
    let w = (1.0 - gamma * gamma / 4.0).sqrt();
    let c = C64::from((w * t).cos());
    let s = C64::new(0.0, -(w * t).sin() / w);
    [
        [c, s * (1.0 + gamma / 2.0)],
        [s * (1.0 - gamma / 2.0), c],
    ]
}

fn dimer_table_by_hand(gamma: f64, t: f64, beta: f64) -> [[f64; 2]; 2] {
    let u = dimer_propagator(gamma, t);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let vecs = [[r, -r], [r, r]];
    let energies = [-1.0, 1.0];
    let z: f64 = energies.iter().map(|e: &f64| (-beta * e).exp()).sum();
    let mut amp = [[C64::from(0.0); 2]; 2];
    for m in 0..2 {
        for n in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    amp[m][n] += u[i][j] * vecs[m][i] * vecs[n][j];
                }
            }
        }
    }
    let mut p = [[0.0; 2]; 2];
    let mut total = 0.0;
    for m in 0..2 {
        for n in 0..2 {
            p[m][n] = (-beta * energies[n]).exp() / z * amp[m][n].norm_sqr();
            total += p[m][n];
        }
    }
    for row in &mut p {
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    p
}

#[test]
fn dimer_table_matches_reference() {
    let by_hand = dimer_table_by_hand(1.0, 1.0, 1.0);
    let spec = LatticeSpec::nonreciprocal(2, 1.5, 1.0);
    let t = purified_transition_table(&spec, &DriveProfile::sudden(1.0), 1.0, 1e-2).unwrap();
    for m in 0..2 {
        for n in 0..2 {
            assert!((by_hand[m][n] - DIMER_TABLE[m][n]).abs() < 1e-14);
            assert!((t.probabilities[(m, n)] - DIMER_TABLE[m][n]).abs() < 1e-12);
        }
    }
    assert!((t.log_norm - DIMER_LOG_NORM).abs() < 1e-12);
}

#[test]
fn infinite_temperature_uses_uniform_weights() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1);
    let profile = DriveProfile::sudden(3.0);
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let prop = propagate_protocol(&spec, &profile, 1e-2).unwrap();
    let t = transition_table(&basis, &prop, 0.0).unwrap();
    let m = basis.vectors().adjoint() * &prop.matrix * basis.vectors();
    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    for row in 0..6 {
        for col in 0..6 {
            let want = m[(row, col)].norm_sqr() / total;
            assert!((t.probabilities[(row, col)] - want).abs() < 1e-14);
        }
    }
}

#[test]
fn hermitian_collapse_for_both_drives() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 0.0);
    for profile in [DriveProfile::slow(20.0), DriveProfile::sudden(5.0)] {
        for beta in [0.0, 0.5, 1000.0] {
            let a = purified_transition_table(&spec, &profile, beta, 1e-2).unwrap();
            let b = hermitian_tpm(&spec, &profile, beta, 1e-2).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }
}

#[test]
fn unitary_columns_are_stochastic() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 0.0);
    let profile = DriveProfile::sudden(2.0);
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let u = propagate_protocol(&spec, &profile, 1e-2).unwrap().effective();
    // beta = 0 makes p_n uniform, so each column sums to 1/L
    let t = hermitian_tpm_with(&basis, &u, 0.0).unwrap();
    for s in t.initial_marginal() {
        assert!((s * 8.0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn characteristic_function_identities() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1);
    let t = purified_transition_table(&spec, &DriveProfile::slow(10.0), 2.0, 1e-2).unwrap();
    let chi = characteristic_function(&t, &[0.0, -1e-5, 1e-5]);
    assert!((chi[0] - C64::from(1.0)).norm() < 1e-12);
    let deriv = (chi[2] - chi[1]) / C64::from(2e-5) * C64::new(0.0, -1.0);
    let (mean, _) = moments(&work_distribution(&t, 1e-8).unwrap());
    assert!((deriv.re - mean).abs() < 1e-6);

    let h = LatticeSpec::nonreciprocal(6, 1.5, 0.0);
    let th = hermitian_tpm(&h, &DriveProfile::slow(10.0), 2.0, 1e-2).unwrap();
    let at_i_beta = characteristic_at(&th, C64::new(0.0, 2.0));
    assert!((at_i_beta - C64::from(1.0)).norm() < 1e-8);
}

#[test]
fn jarzynski_in_the_hermitian_case() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 0.0);
    for profile in [DriveProfile::slow(15.0), DriveProfile::sudden(4.0)] {
        for beta in [0.1, 1.0, 10.0] {
            let t = hermitian_tpm(&spec, &profile, beta, 1e-2).unwrap();
            assert!((jarzynski_estimator(&t) - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn dimer_atoms_are_level_differences() {
    let spec = LatticeSpec::nonreciprocal(2, 1.5, 1.3);
    let t = purified_transition_table(&spec, &DriveProfile::slow(3.0), 0.7, 1e-2).unwrap();
    let d = work_distribution(&t, 1e-8).unwrap();
    for a in &d.atoms {
        assert!([-2.0, 0.0, 2.0].iter().any(|w| (a.w - w).abs() < 1e-12), "{a:?}");
    }
    let unmerged = work_distribution(&t, 0.0).unwrap();
    assert!((d.total() - unmerged.total()).abs() < 1e-12);
    assert!((d.total() - 1.0).abs() < 1e-10);
}

#[test]
fn zero_duration_drive() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1);
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let id = ScaledPropagator::identity(6, 0.0);
    assert!(system_energy_change_with(&basis, &id, 0.3).unwrap().abs() < 1e-14);
    let d = work_distribution(&transition_table(&basis, &id, 0.3).unwrap(), 1e-8).unwrap();
    assert_eq!(d.atoms.len(), 1);
    assert_eq!(moments(&d).1, 0.0);
}

#[test]
fn hermitian_energy_change_is_the_work() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 0.0);
    let profile = DriveProfile::sudden(3.0);
    for beta in [0.1, 1.0, 10.0] {
        let d_es = system_energy_change(&spec, &profile, beta, 1e-2).unwrap();
        let t = hermitian_tpm(&spec, &profile, beta, 1e-2).unwrap();
        let (w, _) = moments(&work_distribution(&t, 1e-8).unwrap());
        assert!((d_es - w).abs() < 1e-8);
    }
}

#[test]
fn energy_change_departs_from_work_except_at_low_temperature() {
    let spec = LatticeSpec::nonreciprocal(8, 1.5, 2.1);
    let profile = DriveProfile::slow(100.0);
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let prop = propagate_protocol(&spec, &profile, 1e-2).unwrap();
    let gap = |beta: f64| {
        let t = transition_table(&basis, &prop, beta).unwrap();
        let (w, _) = moments(&work_distribution(&t, 1e-8).unwrap());
        (system_energy_change_with(&basis, &prop, beta).unwrap() - w).abs()
    };
    assert!(gap(0.1) > 1e-3, "{}", gap(0.1));
    assert!(gap(1000.0) < 1e-8, "{}", gap(1000.0));
}

#[test]
fn bath_populations_in_the_hermitian_case_stay_thermal() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 0.0);
    let profile = DriveProfile::slow(8.0);
    let gibbs = gibbs_weights(EnergyBasis::of_h0(&spec).unwrap().energies(), 0.8).unwrap();
    for t in [0.0, 2.0, 5.5, 8.0] {
        let q = bath_populations(&spec, &profile, 0.8, t, 1e-2).unwrap();
        for (a, b) in q.iter().zip(&gibbs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn bath_populations_follow_the_fastest_growing_modes() {
    // For long sudden drives the propagator is dominated by the eigenvalues
    // with the largest imaginary part, U ~ sum_k exp(-i E_k t) |psi_k><phi_k|.
    let spec = LatticeSpec::nonreciprocal(4, 1.5, 2.1);
    let t_total = 40.0;
    let profile = DriveProfile::sudden(t_total);
    let q = bath_populations(&spec, &profile, 0.0, t_total, 1e-2).unwrap();
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);

    let h = nhwork::model::HamiltonianParts::new(&spec).unwrap().at_amplitude(1.0);
    let r = diagonalize(&h, TOL_IMAG).unwrap();
    let top = r.max_imag;
    let mut dominant = CMatrix::zeros(4, 4);
    for (k, e) in r.eigenvalues.iter().enumerate() {
        if e.im > top - 1e-6 {
            let phase = (C64::new(0.0, -1.0) * C64::from(e.re) * t_total).exp();
            dominant += r.right_vectors.column(k) * r.left_vectors.column(k).adjoint() * phase;
        }
    }
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let norms: Vec<f64> = (&dominant * basis.vectors())
        .column_iter()
        .map(|c| c.norm_squared())
        .collect();
    let total: f64 = norms.iter().sum();
    let tv: f64 = q.iter().zip(&norms).map(|(a, b)| (a - b / total).abs()).sum::<f64>() / 2.0;
    assert!(tv < 1e-3, "tv {tv}");
    let gibbs = gibbs_weights(basis.energies(), 0.0).unwrap();
    let moved: f64 = q.iter().zip(&gibbs).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!(moved > 0.05);
}

#[test]
fn scale_factor_cancels() {
    let spec = LatticeSpec::nonreciprocal(6, 1.5, 2.1).with_delta(0.3);
    let profile = DriveProfile::slow(12.0);
    let basis = EnergyBasis::of_h0(&spec).unwrap();
    let prop = propagate_protocol(&spec, &profile, 1e-2).unwrap();
    let a = transition_table(&basis, &prop, 1.0).unwrap();
    for c in [-30.0, -1.0, 2.5, 40.0] {
        let b = transition_table(&basis, &prop.rescaled(c), 1.0).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
        assert!((a.log_norm - b.log_norm).abs() < 1e-12);
    }
}
