//! Brute-force verifiers for the closed-form transition table.
//!
//! [`bath_tensor_simulation`] builds the purified system-bath state as an
//! explicit vector and measures it by projection. [`unitary_dilation_check`]
//! embeds each coarse propagator segment into a unitary on the system plus a
//! fresh qubit ancilla and post-selects every ancilla on its reference level.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evolve::{propagate, propagate_protocol, ScaledPropagator};
use crate::linalg::{max_abs, spectral_norm, svd, Svd};
use crate::model::{DriveProfile, LatticeSpec};
use crate::thermal::{gibbs_weights, EnergyBasis};
use crate::workstats::TransitionTable;
use crate::{CMatrix, C64};

pub const MAX_TENSOR_SITES: usize = 12;
pub const MAX_DILATION_SITES: usize = 4;
pub const MAX_DILATION_STEPS: usize = 4;

/// Residuals `1 - s^2` down to `-PSD_FLOOR` are clipped to zero.
const PSD_FLOOR: f64 = 1e-12;

fn guard(what: &'static str, value: usize, limit: usize) -> Result<()> {
    if value > limit {
        return Err(Error::DimensionGuard { what, value, limit });
    }
    Ok(())
}

fn table_from_probabilities(energies: &[f64], probs: DMatrix<f64>, beta: f64, log_norm: f64) -> TransitionTable {
    TransitionTable {
        energies: energies.to_vec(),
        log_probabilities: probs.map(f64::ln),
        probabilities: probs,
        beta,
        log_norm,
    }
}

/// Orthonormal bath labels: the columns of the unitary DFT matrix.
fn dft_labels(n: usize) -> CMatrix {
    let norm = (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, j| C64::from_polar(1.0 / norm, 2.0 * PI * (j * k) as f64 / n as f64))
}

/// Transition table from the explicit state `(U (x) I) sum_n C_n |n> (x) |b_n>`.
pub fn bath_tensor_simulation(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    beta: f64,
    dt: f64,
) -> Result<TransitionTable> {
    guard("sites", spec.sites, MAX_TENSOR_SITES)?;
    let basis = EnergyBasis::of_h0(spec)?;
    let prop = propagate_protocol(spec, profile, dt)?;
    bath_tensor_with(&basis, &prop, beta)
}

pub fn bath_tensor_with(basis: &EnergyBasis, prop: &ScaledPropagator, beta: f64) -> Result<TransitionTable> {
    let l = basis.dim();
    guard("sites", l, MAX_TENSOR_SITES)?;
    let weights = gibbs_weights(basis.energies(), beta)?;
    let labels = dft_labels(l);
    let v = basis.vectors();

    // index s * l + b: system site s, bath component b
    let mut psi = DVector::<C64>::zeros(l * l);
    for (n, w) in weights.iter().enumerate() {
        let c = w.sqrt();
        for s in 0..l {
            for b in 0..l {
                psi[s * l + b] += v[(s, n)] * labels[(b, n)] * c;
            }
        }
    }
    let evolved = prop.matrix.kronecker(&CMatrix::identity(l, l)) * psi;
    let norm = evolved.norm_squared();
    if !(norm > f64::MIN_POSITIVE) {
        return Err(Error::Extinction {
            context: format!("system-bath state norm {norm:e}"),
        });
    }
    let probs = DMatrix::from_fn(l, l, |m, n| {
        let mut amp = C64::from(0.0);
        for s in 0..l {
            for b in 0..l {
                amp += (v[(s, m)] * labels[(b, n)]).conj() * evolved[s * l + b];
            }
        }
        amp.norm_sqr() / norm
    });
    Ok(table_from_probabilities(
        basis.energies(),
        probs,
        beta,
        2.0 * prop.log_scale + norm.ln(),
    ))
}

/// One coarse segment `K = exp(log_factor) * contraction`, embedded as
/// `V = [[K~, (I - K~ K~^dagger)^1/2], [(I - K~^dagger K~)^1/2, -K~^dagger]]`
/// with the ancilla reference level as the first block.
#[derive(Debug, Clone)]
pub struct DilatedStep {
    pub contraction: CMatrix,
    pub unitary: CMatrix,
    pub log_factor: f64,
}

impl DilatedStep {
    /// Divides `K` by `sigma_max(K) * exp(extra)`; any `extra >= 0` keeps
    /// the result a contraction.
    pub fn new(kernel: &ScaledPropagator, extra: f64) -> Result<Self> {
        if !(extra.is_finite() && extra >= 0.0) {
            return Err(Error::invalid("extra", format!("{extra} must be >= 0")));
        }
        let sigma = spectral_norm(&kernel.matrix);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Extinction {
                context: format!("segment kernel has sigma_max = {sigma:e}"),
            });
        }
        let k = &kernel.matrix / C64::from(sigma * extra.exp());
        let l = k.nrows();
        // With K~ = W S Z^dagger the two defect operators are W c W^dagger and
        // Z c Z^dagger, c = sqrt(1 - S^2). Taking both from one SVD keeps
        // every 2x2 rotation [[s, c], [c, -s]] orthogonal to rounding.
        let Svd { u: w, s: values, v: z } = svd(&k)?;
        let mut c = Vec::with_capacity(l);
        for &s in &values {
            let residual = 1.0 - s * s;
            if residual < -PSD_FLOOR {
                return Err(Error::NotPositive(residual));
            }
            c.push(C64::from(residual.max(0.0).sqrt()));
        }
        let c = CMatrix::from_diagonal(&DVector::from_vec(c));
        let d_top = &w * &c * w.adjoint();
        let d_bottom = &z * &c * z.adjoint();
        let mut v = CMatrix::zeros(2 * l, 2 * l);
        v.view_mut((0, 0), (l, l)).copy_from(&k);
        v.view_mut((0, l), (l, l)).copy_from(&d_top);
        v.view_mut((l, 0), (l, l)).copy_from(&d_bottom);
        v.view_mut((l, l), (l, l)).copy_from(&(-k.adjoint()));
        Ok(DilatedStep {
            contraction: k,
            unitary: v,
            log_factor: kernel.log_scale + sigma.ln() + extra,
        })
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.unitary.nrows();
        max_abs(&(self.unitary.adjoint() * &self.unitary - CMatrix::identity(n, n)))
    }
}

/// Dilated steps applied in time order, step `j` acting on ancilla `j`.
#[derive(Debug, Clone)]
pub struct DilatedCircuit {
    pub steps: Vec<DilatedStep>,
}

impl DilatedCircuit {
    pub fn new(steps: Vec<DilatedStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("steps", "empty circuit"));
        }
        guard("n_steps", steps.len(), MAX_DILATION_STEPS)?;
        let l = steps[0].contraction.nrows();
        guard("sites", l, MAX_DILATION_SITES)?;
        if steps.iter().any(|s| s.contraction.nrows() != l) {
            return Err(Error::invalid("steps", "mixed dimensions"));
        }
        Ok(DilatedCircuit { steps })
    }

    pub fn sites(&self) -> usize {
        self.steps[0].contraction.nrows()
    }

    /// Runs the circuit on `state[s * spectators + b]` (system site `s`,
    /// spectator index `b`) with every ancilla starting in its reference
    /// level, and returns the unnormalized post-selected state together
    /// with the full output over all ancilla configurations.
    pub fn run(&self, state: &DVector<C64>, spectators: usize) -> (DVector<C64>, DVector<C64>) {
        let l = self.sites();
        let n = self.steps.len();
        let anc = 1usize << n;
        assert_eq!(state.len(), l * spectators, "state size");

        // index (s * spectators + b) * anc + a
        let mut full = DVector::<C64>::zeros(l * spectators * anc);
        for k in 0..l * spectators {
            full[k * anc] = state[k];
        }
        let mut local = DVector::<C64>::zeros(2 * l);
        for (j, step) in self.steps.iter().enumerate() {
            let bit = 1usize << j;
            for b in 0..spectators {
                for a in (0..anc).filter(|a| a & bit == 0) {
                    for s in 0..l {
                        local[s] = full[(s * spectators + b) * anc + a];
                        local[l + s] = full[(s * spectators + b) * anc + (a | bit)];
                    }
                    let out = &step.unitary * &local;
                    for s in 0..l {
                        full[(s * spectators + b) * anc + a] = out[s];
                        full[(s * spectators + b) * anc + (a | bit)] = out[l + s];
                    }
                }
            }
        }
        let post = DVector::from_fn(l * spectators, |k, _| full[k * anc]);
        (post, full)
    }
}

#[derive(Debug, Clone)]
pub struct DilationReport {
    /// Probability that every ancilla is found in its reference level.
    pub survival_probability: f64,
    /// Transition table conditioned on survival.
    pub conditional_table: TransitionTable,
    /// `prod_j sigma_j^2` over the per-step rescale factors.
    pub prefactor: f64,
    pub log_prefactor: f64,
    pub max_unitarity_defect: f64,
}

impl DilationReport {
    /// `1 / survival`: converts post-selected joint probabilities into the
    /// normalized ones.
    pub fn observed_space_prefactor(&self) -> f64 {
        1.0 / self.survival_probability
    }
}

/// Dilation of the protocol split into `n_steps` equal segments, each
/// integrated with `dt_inner`.
pub fn unitary_dilation_check(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    n_steps: usize,
    beta: f64,
    dt_inner: f64,
) -> Result<DilationReport> {
    guard("sites", spec.sites, MAX_DILATION_SITES)?;
    guard("n_steps", n_steps, MAX_DILATION_STEPS)?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be >= 1"));
    }
    profile.validate()?;
    let basis = EnergyBasis::of_h0(spec)?;
    let t_f = profile.t_final();
    let kernels = (0..n_steps)
        .map(|j| {
            let t0 = t_f * j as f64 / n_steps as f64;
            let t1 = if j + 1 == n_steps {
                t_f
            } else {
                t_f * (j + 1) as f64 / n_steps as f64
            };
            propagate(spec, profile, t0, t1, dt_inner)
        })
        .collect::<Result<Vec<_>>>()?;
    dilate_kernels(&basis, &kernels, beta, &vec![0.0; n_steps])
}

/// Dilation of explicit segment kernels, with `extra[j]` added to the log of
/// step `j`'s rescale divisor.
pub fn dilate_kernels(
    basis: &EnergyBasis,
    kernels: &[ScaledPropagator],
    beta: f64,
    extra: &[f64],
) -> Result<DilationReport> {
    if kernels.len() != extra.len() {
        return Err(Error::invalid("extra", "one entry per kernel"));
    }
    let l = basis.dim();
    if kernels.iter().any(|k| k.dim() != l) {
        return Err(Error::invalid("kernels", "dimension does not match the basis"));
    }
    let steps = kernels
        .iter()
        .zip(extra)
        .map(|(k, &e)| DilatedStep::new(k, e))
        .collect::<Result<Vec<_>>>()?;
    let circuit = DilatedCircuit::new(steps)?;

    // Bath labels are the standard basis of an l-dimensional register.
    let weights = gibbs_weights(basis.energies(), beta)?;
    let v = basis.vectors();
    let psi = DVector::from_fn(l * l, |k, _| {
        let (s, n) = (k / l, k % l);
        v[(s, n)] * weights[n].sqrt()
    });
    let (post, _) = circuit.run(&psi, l);
    let survival = post.norm_squared();
    if !(survival > f64::MIN_POSITIVE) {
        return Err(Error::Extinction {
            context: format!("post-selection survival {survival:e}"),
        });
    }
    let probs = DMatrix::from_fn(l, l, |m, n| {
        let amp: C64 = (0..l).map(|s| v[(s, m)].conj() * post[s * l + n]).sum();
        amp.norm_sqr() / survival
    });
    let log_prefactor = 2.0 * circuit.steps.iter().map(|s| s.log_factor).sum::<f64>();
    let max_unitarity_defect = circuit
        .steps
        .iter()
        .map(DilatedStep::unitarity_defect)
        .fold(0.0, f64::max);
    Ok(DilationReport {
        survival_probability: survival,
        conditional_table: table_from_probabilities(basis.energies(), probs, beta, log_prefactor + survival.ln()),
        prefactor: log_prefactor.exp(),
        log_prefactor,
        max_unitarity_defect,
    })
}
