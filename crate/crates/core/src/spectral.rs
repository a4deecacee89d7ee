//! Biorthogonal eigen-structure of the non-Hermitian chain: paired left and
//! right eigenvectors, PT-phase classification, exceptional-point bracketing
//! and spectrum sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HamiltonianParts, LatticeSpec, Term};
use crate::linalg::to_faer;
use crate::{CMatrix, C64};

/// Threshold on `max |Im E|` separating the PT-unbroken and broken phases,
/// in units of `g1`.
pub const TOL_IMAG: f64 = 1e-7;

/// Eigenvalues closer than this (relative to the spectral radius) are
/// treated as one degenerate cluster.
const CLUSTER_TOL: f64 = 1e-9;

/// How the left eigenvectors relate to the right ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// `<phi_n|psi_m> = delta_nm`, every eigenvalue simple.
    Biorthonormal,
    /// Biorthonormal, but some eigenvalues are degenerate, so the pairing
    /// inside those clusters is one choice among many.
    Degenerate,
    /// The overlap matrix is singular (the input sits on an exceptional
    /// point). Vectors are unit-normalized and unpaired.
    Defective,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors, one column per eigenvalue.
    pub right_vectors: CMatrix,
    /// Left eigenvectors (eigenvectors of `H^dagger`), scaled so that
    /// `<phi_n|psi_n> = 1` unless the input is defective.
    pub left_vectors: CMatrix,
    /// Largest `||phi_n|| ||psi_n|| / |<phi_n|psi_n>|`; `inf` when defective.
    pub biorth_condition: f64,
    pub max_imag: f64,
    pub pt_unbroken: bool,
    pub pairing: Pairing,
}

fn eigen_pairs(a: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = a.nrows();
    let evd = to_faer(a).eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<C64> = (0..n).map(|k| evd.S()[k]).collect();
    let u = evd.U();
    let mut vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
    Ok((values, vectors))
}

fn sort_key(z: C64, quantum: f64) -> (i64, f64) {
    ((z.re / quantum).round() as i64, z.im)
}

fn sorted_order(values: &[C64], quantum: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, ia) = sort_key(values[a], quantum);
        let (kb, ib) = sort_key(values[b], quantum);
        ka.cmp(&kb).then(ia.total_cmp(&ib))
    });
    order
}

/// Groups of indices whose eigenvalues lie within `quantum` of each other.
fn clusters(values: &[C64], quantum: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= quantum {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut().filter(|l| **l == b) {
                    *l = a;
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&k| label[k] == root).collect();
        if members.len() > 1 {
            out.push(members);
        }
    }
    out
}

/// Replaces the right vectors of each degenerate cluster by an orthonormal
/// basis of their span. Skipped when the span is not an eigenspace to
/// working accuracy, which happens next to an exceptional point.
fn orthonormalize_clusters(h: &CMatrix, values: &[C64], right: &mut CMatrix, quantum: f64) {
    let n = right.nrows();
    for members in clusters(values, quantum) {
        let block = CMatrix::from_fn(n, members.len(), |i, j| right[(i, members[j])]);
        let q = block.qr().q();
        let mean = members.iter().map(|&k| values[k]).sum::<C64>() / C64::from(members.len() as f64);
        let residual = h * &q - &q * mean;
        let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if residual.iter().all(|z| z.norm() <= 1e-10 * scale) {
            for (j, &k) in members.iter().enumerate() {
                right.set_column(k, &q.column(j));
            }
        }
    }
}

/// Right eigenvectors of `H`, left eigenvectors from `H^dagger` matched by
/// conjugate eigenvalue, then rescaled to `<phi_n|psi_m> = delta_nm`.
pub fn diagonalize(h: &CMatrix, tol_imag: f64) -> Result<SpectrumReport> {
    if !h.is_square() {
        return Err(Error::invalid("H", "not square"));
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("H", "non-finite entry"));
    }
    let n = h.nrows();
    let (rvals, rvecs) = eigen_pairs(h)?;
    let (lvals, lvecs) = eigen_pairs(&h.adjoint())?;

    let radius = rvals.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let quantum = CLUSTER_TOL * radius;
    let order = sorted_order(&rvals, quantum);
    let eigenvalues: Vec<C64> = order.iter().map(|&k| rvals[k]).collect();
    let mut right = CMatrix::from_fn(n, n, |i, j| rvecs[(i, order[j])]);
    orthonormalize_clusters(h, &eigenvalues, &mut right, quantum);

    // Greedy pairing on (eigenvalue distance, -overlap), smallest first.
    let mut candidates = Vec::with_capacity(n * n);
    for r in 0..n {
        for l in 0..n {
            let dist = (lvals[l].conj() - eigenvalues[r]).norm();
            let overlap = lvecs.column(l).dotc(&right.column(r)).norm();
            candidates.push((dist, -overlap, r, l));
        }
    }
    candidates.sort_by(|a, b| {
        let da = (a.0 / quantum).round();
        let db = (b.0 / quantum).round();
        da.total_cmp(&db).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
    });
    let mut left_of = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for &(_, _, r, l) in &candidates {
        if left_of[r] == usize::MAX && !used[l] {
            left_of[r] = l;
            used[l] = true;
        }
    }
    let mut left = CMatrix::from_fn(n, n, |i, j| lvecs[(i, left_of[j])]);

    let degenerate = eigenvalues
        .iter()
        .enumerate()
        .any(|(i, a)| eigenvalues[i + 1..].iter().any(|b| (a - b).norm() <= quantum));
    let max_imag = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);

    // Diagonal rescale, then a global correction that removes the residual
    // off-diagonal overlaps left by the two independent solves.
    let overlaps: Vec<C64> = (0..n).map(|j| left.column(j).dotc(&right.column(j))).collect();
    let smallest = overlaps.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let defective_report = |left: CMatrix| SpectrumReport {
        eigenvalues: eigenvalues.clone(),
        right_vectors: right.clone(),
        left_vectors: left,
        biorth_condition: f64::INFINITY,
        max_imag,
        pt_unbroken: max_imag < tol_imag,
        pairing: Pairing::Defective,
    };
    if !(smallest > 1e-14) {
        return Ok(defective_report(left));
    }
    for (j, s) in overlaps.iter().enumerate() {
        let scale = s.conj().inv();
        for i in 0..n {
            left[(i, j)] *= scale;
        }
    }
    let s = left.adjoint() * &right;
    let corrected = s
        .adjoint()
        .lu()
        .try_inverse()
        .map(|inv_dag| &left * inv_dag);
    let left = match corrected {
        Some(l) if l.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => l,
        _ => return Ok(defective_report(left)),
    };
    let biorth_condition = (0..n)
        .map(|j| left.column(j).norm() * right.column(j).norm() / left.column(j).dotc(&right.column(j)).norm())
        .fold(1.0, f64::max);

    Ok(SpectrumReport {
        eigenvalues,
        right_vectors: right,
        left_vectors: left,
        biorth_condition,
        max_imag,
        pt_unbroken: max_imag < tol_imag,
        pairing: if degenerate {
            Pairing::Degenerate
        } else {
            Pairing::Biorthonormal
        },
    })
}

/// PT metric `M = sum_n |phi_n><phi_n|`, which makes the right eigenvectors
/// orthonormal in the unbroken phase.
pub fn pt_metric(report: &SpectrumReport) -> Result<CMatrix> {
    if !report.pt_unbroken {
        return Err(Error::BrokenPhase {
            max_imag: report.max_imag,
        });
    }
    if report.pairing == Pairing::Defective {
        return Err(Error::Eigen("no biorthogonal basis at an exceptional point".into()));
    }
    Ok(&report.left_vectors * report.left_vectors.adjoint())
}

/// Parameter varied by a spectrum sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Delta,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Delta => "delta",
        }
    }

    /// `spec` with the parameter set to `value` and its term switched on.
    pub fn apply(&self, spec: &LatticeSpec, value: f64) -> LatticeSpec {
        let mut out = spec.clone();
        match self {
            SweepParam::Gamma => {
                out.gamma = value;
                out.terms.insert(Term::Nonreciprocal);
            }
            SweepParam::Delta => {
                out.delta = value;
                out.terms.insert(Term::LossGain);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: SpectrumReport,
    /// `tracks[j]` is the index into `report.eigenvalues` of eigenvalue
    /// track `j`, continued from the previous grid point.
    pub tracks: Vec<usize>,
}

impl SweepPoint {
    pub fn track(&self, j: usize) -> C64 {
        self.report.eigenvalues[self.tracks[j]]
    }
}

/// Spectrum of `H0 + H_nr + H_lg` at full drive amplitude over a grid.
pub fn sweep_spectrum(spec: &LatticeSpec, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    sweep_spectrum_with(grid, |v| Ok(param.apply(spec, v)))
}

/// Sweep with an arbitrary grid-value to chain mapping, e.g. a loss/gain
/// strength tied to `gamma`.
pub fn sweep_spectrum_with<F>(grid: &[f64], spec_at: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64) -> Result<LatticeSpec> + Sync,
{
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("grid", "not sorted"));
    }
    let reports: Vec<SpectrumReport> = grid
        .par_iter()
        .map(|&v| {
            let spec = spec_at(v)?;
            let h = HamiltonianParts::new(&spec)?.at_amplitude(1.0);
            diagonalize(&h, TOL_IMAG)
        })
        .collect::<Result<_>>()?;

    let mut out: Vec<SweepPoint> = Vec::with_capacity(grid.len());
    for (&value, report) in grid.iter().zip(reports) {
        let tracks = match out.last() {
            None => (0..report.eigenvalues.len()).collect(),
            Some(prev) => continue_tracks(prev, &report.eigenvalues),
        };
        out.push(SweepPoint { value, report, tracks });
    }
    Ok(out)
}

fn continue_tracks(prev: &SweepPoint, next: &[C64]) -> Vec<usize> {
    let n = next.len();
    let mut pairs = Vec::with_capacity(n * n);
    for j in 0..n {
        let from = prev.track(j);
        for (k, to) in next.iter().enumerate() {
            pairs.push(((from - to).norm(), j, k));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut tracks = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, j, k) in pairs {
        if tracks[j] == usize::MAX && !taken[k] {
            tracks[j] = k;
            taken[k] = true;
        }
    }
    tracks
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionStep {
    pub gamma: f64,
    pub broken: bool,
    pub max_imag: f64,
    pub biorth_condition: f64,
}

#[derive(Debug, Clone)]
pub struct EpEstimate {
    pub gamma_star: f64,
    pub lo: f64,
    pub hi: f64,
    pub history: Vec<BisectionStep>,
}

fn probe_gamma(spec: &LatticeSpec, gamma: f64) -> Result<BisectionStep> {
    let spec = SweepParam::Gamma.apply(spec, gamma);
    let h = HamiltonianParts::new(&spec)?.at_amplitude(1.0);
    let r = diagonalize(&h, TOL_IMAG)?;
    Ok(BisectionStep {
        gamma,
        broken: !r.pt_unbroken,
        max_imag: r.max_imag,
        biorth_condition: r.biorth_condition,
    })
}

/// Bisects the nonreciprocal strength on the indicator `max |Im E| > TOL_IMAG`
/// until the bracket is narrower than `tol`.
pub fn locate_ep(spec: &LatticeSpec, gamma_lo: f64, gamma_hi: f64, tol: f64) -> Result<EpEstimate> {
    if !(gamma_lo < gamma_hi) || !(tol > 0.0) {
        return Err(Error::invalid("bracket", format!("[{gamma_lo}, {gamma_hi}] with tol {tol}")));
    }
    let lo_step = probe_gamma(spec, gamma_lo)?;
    let hi_step = probe_gamma(spec, gamma_hi)?;
    if lo_step.broken || !hi_step.broken {
        return Err(Error::InvalidBracket {
            lo: gamma_lo,
            hi: gamma_hi,
        });
    }
    let (mut lo, mut hi) = (gamma_lo, gamma_hi);
    let mut history = vec![lo_step, hi_step];
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let step = probe_gamma(spec, mid)?;
        if step.broken {
            hi = mid;
        } else {
            lo = mid;
        }
        history.push(step);
    }
    Ok(EpEstimate {
        gamma_star: 0.5 * (lo + hi),
        lo,
        hi,
        history,
    })
}
