//! Eigenbasis of the endpoint Hamiltonian and Gibbs weights over it.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, max_abs};
use crate::model::{build_h0, LatticeSpec};
use crate::{CMatrix, C64};

/// Energies closer than this are one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Orthonormal eigenbasis of `H0` with energies sorted ascending.
///
/// Inside a degenerate level the vectors are re-orthonormalized and each one
/// is oriented so that its first non-negligible component is positive.
#[derive(Debug, Clone)]
pub struct EnergyBasis {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl EnergyBasis {
    pub fn of_h0(spec: &LatticeSpec) -> Result<Self> {
        let h0 = build_h0(spec)?;
        Self::of_real_symmetric(&h0.map(|z| z.re))
    }

    pub fn of_real_symmetric(h: &DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::<f64>::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

        let mut basis = EnergyBasis {
            energies,
            vectors: CMatrix::zeros(0, 0),
        };
        for range in basis.levels() {
            orthonormalize_real(&mut vectors, range);
        }
        for j in 0..n {
            let lead = vectors.column(j).iter().copied().find(|x| x.abs() > 1e-12);
            if lead.is_some_and(|x| x < 0.0) {
                vectors.column_mut(j).neg_mut();
            }
        }
        basis.vectors = vectors.map(C64::from);
        Ok(basis)
    }

    /// Builds a basis from explicit energies and orthonormal columns.
    pub fn from_parts(energies: Vec<f64>, vectors: CMatrix) -> Result<Self> {
        let n = energies.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::invalid("vectors", "shape does not match energies"));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("energies", "not sorted ascending"));
        }
        let defect = max_abs(&(vectors.adjoint() * &vectors - CMatrix::identity(n, n)));
        if defect > 1e-10 {
            return Err(Error::invalid("vectors", format!("not orthonormal ({defect:e})")));
        }
        Ok(EnergyBasis { energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, in site representation.
    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// Index ranges of degenerate levels.
    pub fn levels(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.energies.len() {
            if k == self.energies.len() || self.energies[k] - self.energies[k - 1] > DEGENERACY_TOL {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// `<m|A|n>` for all `m, n`.
    pub fn to_energy_frame(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// `sum_n w_n |n><n|` in site representation.
    pub fn diagonal_operator(&self, weights: &[f64]) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            let v = self.vectors.column(k);
            out += v * v.adjoint() * C64::from(w);
        }
        out
    }
}

fn orthonormalize_real(vectors: &mut DMatrix<f64>, range: Range<usize>) {
    for j in range.clone() {
        for k in range.start..j {
            let proj = vectors.column(k).dot(&vectors.column(j));
            let prev = vectors.column(k).clone_owned();
            vectors.column_mut(j).axpy(-proj, &prev, 1.0);
        }
        let norm = vectors.column(j).norm();
        vectors.column_mut(j).unscale_mut(norm);
    }
}

/// Natural logs of the Gibbs weights `exp(-beta E_n) / Z`.
pub fn log_gibbs_weights(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid("beta", format!("{beta} must be finite and >= 0")));
    }
    let exponents: Vec<f64> = energies.iter().map(|&e| -beta * e).collect();
    let log_z = log_sum_exp(exponents.iter().copied());
    Ok(exponents.into_iter().map(|x| x - log_z).collect())
}

pub fn gibbs_weights(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    Ok(log_gibbs_weights(energies, beta)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// `exp(-beta H0) / Z` in site representation.
pub fn thermal_state(basis: &EnergyBasis, beta: f64) -> Result<CMatrix> {
    Ok(basis.diagonal_operator(&gibbs_weights(basis.energies(), beta)?))
}
