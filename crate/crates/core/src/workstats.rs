//! Two-point-measurement work statistics with a purified thermal state.
//!
//! The initial state `sum_n C_n |n> (x) |b_n>` carries orthonormal bath
//! labels, so a joint final measurement on `|m> (x) |b_n>` identifies both
//! the initial and the final energy. Normalizing by the total-state norm
//! gives
//!
//! ```text
//! P[m, n] = C_n^2 |<m|U|n>|^2 / sum_n C_n^2 <n|U^dagger U|n>
//! ```
//!
//! which reduces to the ordinary unitary expression when `H` is Hermitian.
//! Everything is computed in the log domain so that `beta = 1000` and
//! propagators with huge scale factors stay finite.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evolve::{evolve_density_with, propagate, propagate_protocol, ScaledPropagator};
use crate::linalg::log_sum_exp;
use crate::model::{DriveProfile, LatticeSpec};
use crate::thermal::{gibbs_weights, log_gibbs_weights, EnergyBasis};
use crate::C64;

/// Joint probabilities of (final level `m`, initial level `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    /// Eigenvalues of `H0`, ascending.
    pub energies: Vec<f64>,
    /// `probabilities[(m, n)]`: row is the final level, column the initial.
    pub probabilities: DMatrix<f64>,
    /// Natural logs of `probabilities`, kept because the exponentiated
    /// values underflow at low temperature.
    pub log_probabilities: DMatrix<f64>,
    pub beta: f64,
    /// `ln N(t_f)`, the log of the total-state norm before normalization.
    pub log_norm: f64,
}

impl TransitionTable {
    fn from_log(energies: Vec<f64>, log_p: DMatrix<f64>, beta: f64, log_norm: f64) -> Self {
        TransitionTable {
            energies,
            probabilities: log_p.map(f64::exp),
            log_probabilities: log_p,
            beta,
            log_norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.sum()
    }

    /// Marginal distribution of the initial level.
    pub fn initial_marginal(&self) -> Vec<f64> {
        self.probabilities.column_iter().map(|c| c.sum()).collect()
    }

    /// Marginal distribution of the final level.
    pub fn final_marginal(&self) -> Vec<f64> {
        self.probabilities.row_iter().map(|r| r.sum()).collect()
    }

    /// `(E_m - E_n, P[m, n])` for every pair, column-major.
    pub fn work_values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.dim();
        (0..n).flat_map(move |col| {
            (0..n).map(move |row| (self.energies[row] - self.energies[col], self.probabilities[(row, col)]))
        })
    }

    /// Largest entrywise difference of the probabilities.
    pub fn max_abs_diff(&self, other: &TransitionTable) -> f64 {
        assert_eq!(self.dim(), other.dim(), "tables of different size");
        self.probabilities
            .iter()
            .zip(other.probabilities.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Closed-form table for a propagator that was already computed. The
/// propagator's scale factor cancels and only enters `log_norm`.
pub fn transition_table(basis: &EnergyBasis, prop: &ScaledPropagator, beta: f64) -> Result<TransitionTable> {
    let n = basis.dim();
    if prop.dim() != n {
        return Err(Error::invalid("propagator", "dimension does not match the basis"));
    }
    let log_c2 = log_gibbs_weights(basis.energies(), beta)?;
    let mut m = basis.to_energy_frame(&prop.matrix);
    // An exact power-of-two rescale keeps the logs O(1), so the result does
    // not depend on how the scale is split between matrix and log_scale.
    let peak = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let shift = if peak > 0.0 && peak.is_finite() { peak.log2().round() as i32 } else { 0 };
    m *= C64::from(2f64.powi(-shift));
    let log_terms = DMatrix::from_fn(n, n, |row, col| log_c2[col] + m[(row, col)].norm_sqr().ln());
    let log_sum = log_sum_exp(log_terms.iter().copied());
    if !log_sum.is_finite() {
        return Err(Error::Extinction {
            context: format!("total-state norm ln N = {log_sum}"),
        });
    }
    let log_p = log_terms.map(|x| x - log_sum);
    Ok(TransitionTable::from_log(
        basis.energies().to_vec(),
        log_p,
        beta,
        2.0 * (prop.log_scale + f64::from(shift) * std::f64::consts::LN_2) + log_sum,
    ))
}

pub fn purified_transition_table(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    beta: f64,
    dt: f64,
) -> Result<TransitionTable> {
    let basis = EnergyBasis::of_h0(spec)?;
    let prop = propagate_protocol(spec, profile, dt)?;
    transition_table(&basis, &prop, beta)
}

/// Ordinary two-point measurement `P[m, n] = p_n |<m|U|n>|^2` with the
/// non-Hermitian terms switched off. No normalization is applied.
pub fn hermitian_tpm(spec: &LatticeSpec, profile: &DriveProfile, beta: f64, dt: f64) -> Result<TransitionTable> {
    let spec = spec.hermitian();
    let basis = EnergyBasis::of_h0(&spec)?;
    let prop = propagate_protocol(&spec, profile, dt)?;
    hermitian_tpm_with(&basis, &prop.effective(), beta)
}

/// Unitary TPM table for an explicit site-basis evolution operator.
pub fn hermitian_tpm_with(basis: &EnergyBasis, u: &crate::CMatrix, beta: f64) -> Result<TransitionTable> {
    let n = basis.dim();
    let p = gibbs_weights(basis.energies(), beta)?;
    let t = basis.to_energy_frame(u);
    let probs = DMatrix::from_fn(n, n, |row, col| p[col] * t[(row, col)].norm_sqr());
    Ok(TransitionTable {
        energies: basis.energies().to_vec(),
        log_probabilities: probs.map(f64::ln),
        log_norm: probs.sum().ln(),
        probabilities: probs,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub w: f64,
    pub p: f64,
}

/// Discrete work distribution with atoms at strictly increasing `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    pub atoms: Vec<Atom>,
    pub merge_tol: f64,
}

/// Clusters whose total probability is below this are dropped; they are
/// rounding residue of transitions that are exactly forbidden.
pub const NEGLIGIBLE: f64 = 1e-30;

/// Groups `w = E_m - E_n` by single linkage on the sorted values: a new
/// atom starts wherever the gap to the previous value exceeds `merge_tol`.
/// Each atom sits at the probability-weighted mean of its members.
pub fn work_distribution(table: &TransitionTable, merge_tol: f64) -> Result<WorkDistribution> {
    if !(merge_tol.is_finite() && merge_tol >= 0.0) {
        return Err(Error::invalid("merge_tol", format!("{merge_tol} must be >= 0")));
    }
    let mut pairs: Vec<(f64, f64)> = table.work_values().collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut atoms = Vec::new();
    let mut start = 0;
    for k in 1..=pairs.len() {
        if k == pairs.len() || pairs[k].0 - pairs[k - 1].0 > merge_tol {
            let members = &pairs[start..k];
            let p: f64 = members.iter().map(|x| x.1).sum();
            if p >= NEGLIGIBLE {
                let w = members.iter().map(|x| x.0 * x.1).sum::<f64>() / p;
                atoms.push(Atom { w, p });
            }
            start = k;
        }
    }
    Ok(WorkDistribution { atoms, merge_tol })
}

impl WorkDistribution {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.p).sum()
    }

    /// Total-variation distance, matching atoms whose positions agree to
    /// within the larger of the two merge tolerances.
    pub fn total_variation(&self, other: &WorkDistribution) -> f64 {
        let tol = self.merge_tol.max(other.merge_tol);
        let (a, b) = (&self.atoms, &other.atoms);
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].w < b[j].w - tol) {
                sum += a[i].p;
                i += 1;
            } else if i == a.len() || b[j].w < a[i].w - tol {
                sum += b[j].p;
                j += 1;
            } else {
                sum += (a[i].p - b[j].p).abs();
                i += 1;
                j += 1;
            }
        }
        0.5 * sum
    }
}

/// Mean and variance of the work.
pub fn moments(dist: &WorkDistribution) -> (f64, f64) {
    let mean: f64 = dist.atoms.iter().map(|a| a.w * a.p).sum();
    let var = dist.atoms.iter().map(|a| a.p * (a.w - mean).powi(2)).sum();
    (mean, var)
}

/// `chi(u) = sum P[m, n] exp(i u (E_m - E_n))`.
pub fn characteristic_function(table: &TransitionTable, u_grid: &[f64]) -> Vec<C64> {
    u_grid
        .iter()
        .map(|&u| characteristic_at(table, C64::from(u)))
        .collect()
}

/// The characteristic function continued to complex arguments.
pub fn characteristic_at(table: &TransitionTable, u: C64) -> C64 {
    table
        .work_values()
        .map(|(w, p)| (C64::i() * u * w).exp() * p)
        .sum()
}

/// `<exp(-beta W)>` at the table's own temperature, summed in the log domain.
pub fn jarzynski_estimator(table: &TransitionTable) -> f64 {
    let beta = table.beta;
    let n = table.dim();
    let terms = (0..n).flat_map(|col| {
        (0..n).map(move |row| {
            table.log_probabilities[(row, col)] - beta * (table.energies[row] - table.energies[col])
        })
    });
    log_sum_exp(terms.collect::<Vec<_>>()).exp()
}

/// `Tr{H0 rho(t_f)} - Tr{H0 rho0}` with the normalized density evolution.
pub fn system_energy_change_with(basis: &EnergyBasis, prop: &ScaledPropagator, beta: f64) -> Result<f64> {
    let p = gibbs_weights(basis.energies(), beta)?;
    let rho = evolve_density_with(prop, &basis.diagonal_operator(&p))?;
    let frame = basis.to_energy_frame(&rho);
    let after: f64 = basis.energies().iter().enumerate().map(|(k, e)| e * frame[(k, k)].re).sum();
    let before: f64 = basis.energies().iter().zip(&p).map(|(e, w)| e * w).sum();
    Ok(after - before)
}

pub fn system_energy_change(spec: &LatticeSpec, profile: &DriveProfile, beta: f64, dt: f64) -> Result<f64> {
    let basis = EnergyBasis::of_h0(spec)?;
    let prop = propagate_protocol(spec, profile, dt)?;
    system_energy_change_with(&basis, &prop, beta)
}

/// `C_n^2 <n|U^dagger U|n> / N` for a propagator from time zero.
pub fn bath_populations_with(basis: &EnergyBasis, prop: &ScaledPropagator, beta: f64) -> Result<Vec<f64>> {
    let log_c2 = log_gibbs_weights(basis.energies(), beta)?;
    let m = &prop.matrix * basis.vectors();
    let logs: Vec<f64> = m
        .column_iter()
        .zip(&log_c2)
        .map(|(col, c)| c + col.norm_squared().ln())
        .collect();
    let log_sum = log_sum_exp(logs.iter().copied());
    if !log_sum.is_finite() {
        return Err(Error::Extinction {
            context: format!("bath normalization ln N = {log_sum}"),
        });
    }
    Ok(logs.into_iter().map(|x| (x - log_sum).exp()).collect())
}

/// Populations of the bath labels at time `t` of the protocol.
pub fn bath_populations(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    beta: f64,
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let basis = EnergyBasis::of_h0(spec)?;
    if !(t >= 0.0 && t <= profile.t_final()) {
        return Err(Error::invalid("t", format!("{t} outside [0, {}]", profile.t_final())));
    }
    if t == 0.0 {
        return gibbs_weights(basis.energies(), beta);
    }
    let prop = propagate(spec, profile, 0.0, t, dt)?;
    bath_populations_with(&basis, &prop, beta)
}
