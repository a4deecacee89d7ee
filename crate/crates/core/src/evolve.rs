//! Time-ordered propagators of `H0 + f(t) H_nh` and the normalized density
//! evolution `rho(t) = U rho0 U^dagger / Tr{U rho0 U^dagger}`.
//!
//! Past the exceptional point the propagator norm grows like `exp(|Im E| t)`
//! and overflows double precision for the long drives of interest. A
//! [`ScaledPropagator`] therefore stores a well-conditioned matrix together
//! with the natural log of the factor that was divided out of it.

use crate::error::{Error, Result};
use crate::linalg::{expm, frobenius, hermitian_part, max_abs, spectral_norm, svd};
use crate::model::{DriveProfile, HamiltonianParts, LatticeSpec};
use crate::thermal::{gibbs_weights, EnergyBasis};
use crate::{CMatrix, C64};

/// Default integration step in units of `1/g1`.
pub const DEFAULT_DT: f64 = 1e-2;

/// `U(t_end <- t_start) = exp(log_scale) * matrix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPropagator {
    pub matrix: CMatrix,
    pub log_scale: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl ScaledPropagator {
    pub fn identity(dim: usize, t: f64) -> Self {
        ScaledPropagator {
            matrix: CMatrix::identity(dim, dim),
            log_scale: 0.0,
            t_start: t,
            t_end: t,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The unscaled propagator. Overflows when `log_scale` is large.
    pub fn effective(&self) -> CMatrix {
        &self.matrix * C64::from(self.log_scale.exp())
    }

    /// Same effective operator with `e^c` moved into the stored matrix.
    pub fn rescaled(&self, c: f64) -> Self {
        ScaledPropagator {
            matrix: &self.matrix * C64::from(c.exp()),
            log_scale: self.log_scale - c,
            ..self.clone()
        }
    }

    /// Propagator over `[self.t_start, later.t_end]`.
    pub fn then(&self, later: &ScaledPropagator) -> Result<ScaledPropagator> {
        let mut out = ScaledPropagator {
            matrix: &later.matrix * &self.matrix,
            log_scale: self.log_scale + later.log_scale,
            t_start: self.t_start,
            t_end: later.t_end,
        };
        out.normalize()?;
        Ok(out)
    }

    /// Divides the largest singular value out of the matrix.
    pub fn normalize(&mut self) -> Result<()> {
        let sigma = spectral_norm(&self.matrix);
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Extinction {
                context: format!("propagator over [{}, {}] has norm {sigma}", self.t_start, self.t_end),
            });
        }
        self.matrix.unscale_mut(sigma);
        self.log_scale += sigma.ln();
        Ok(())
    }
}

fn step_count(span: f64, dt: f64) -> usize {
    let n = (span / dt * (1.0 - 1e-12)).ceil();
    (n as usize).max(1)
}

/// Ordered product of midpoint exponentials `exp(-i H(t_mid) h)` over
/// `[t0, t1]` with a uniform step `h <= dt`. The stored matrix is
/// renormalized whenever its Frobenius norm leaves `[sqrt(L)/e, e sqrt(L)]`
/// and once more at the end. When every sampled Hamiltonian is Hermitian the
/// result is projected onto the nearest unitary instead.
pub fn propagate_with<F>(dim: usize, mut hamiltonian: F, t0: f64, t1: f64, dt: f64) -> Result<ScaledPropagator>
where
    F: FnMut(f64) -> CMatrix,
{
    if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
        return Err(Error::invalid("t1", format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let steps = step_count(t1 - t0, dt);
    let h = (t1 - t0) / steps as f64;
    let root = (dim as f64).sqrt();
    let (lo, hi) = (root / std::f64::consts::E, root * std::f64::consts::E);

    let mut prop = ScaledPropagator::identity(dim, t0);
    prop.t_end = t1;
    let mut cached: Option<(CMatrix, CMatrix)> = None;
    let mut hermitian = true;
    for k in 0..steps {
        let mid = t0 + (k as f64 + 0.5) * h;
        let hm = hamiltonian(mid);
        let reuse = matches!(&cached, Some((prev, _)) if *prev == hm);
        if !reuse {
            hermitian = hermitian && hm == hm.adjoint();
            let step = expm(&(&hm * C64::new(0.0, -h))).map_err(|_| Error::NonFinite { steps: k })?;
            cached = Some((hm, step));
        }
        let step = &cached.as_ref().expect("step cached").1;
        prop.matrix = step * &prop.matrix;

        let norm = frobenius(&prop.matrix);
        if !norm.is_finite() {
            return Err(Error::NonFinite { steps: k + 1 });
        }
        if norm < lo || norm > hi {
            prop.normalize()?;
        }
    }
    if hermitian {
        // Rounding drift accumulates linearly in the step count; the exact
        // result is unitary, so replace the product by its polar factor.
        let d = svd(&prop.matrix).map_err(|_| Error::NonFinite { steps })?;
        prop.matrix = d.u * d.v.adjoint();
        prop.log_scale = 0.0;
        return Ok(prop);
    }
    prop.normalize()?;
    Ok(prop)
}

/// Propagator of the driven chain from `t0` to `t1`.
pub fn propagate(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<ScaledPropagator> {
    profile.validate()?;
    if t0 < 0.0 || t1 > profile.t_final() * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "t1",
            format!("[{t0}, {t1}] outside [0, {}]", profile.t_final()),
        ));
    }
    let parts = HamiltonianParts::new(spec)?;
    propagate_with(spec.sites, |t| parts.at_amplitude(profile.amplitude(t)), t0, t1, dt)
}

/// Propagator over the whole protocol `[0, rounds * t_total]`. The drive is
/// periodic in `t_total`, so one round is integrated and then repeated.
pub fn propagate_protocol(spec: &LatticeSpec, profile: &DriveProfile, dt: f64) -> Result<ScaledPropagator> {
    let round = propagate(spec, profile, 0.0, profile.t_total, dt)?;
    let mut out = round.clone();
    for _ in 1..profile.rounds {
        let next = ScaledPropagator {
            t_start: out.t_end,
            t_end: out.t_end + profile.t_total,
            ..round.clone()
        };
        out = out.then(&next)?;
    }
    Ok(out)
}

/// Relative Frobenius distance `||U_a - U_b|| / ||U_b||` of the effective
/// propagators, evaluated without forming either one.
pub fn relative_distance(a: &ScaledPropagator, b: &ScaledPropagator) -> f64 {
    let shifted = &a.matrix * C64::from((a.log_scale - b.log_scale).exp());
    frobenius(&(shifted - &b.matrix)) / frobenius(&b.matrix)
}

/// Whole-protocol propagator at `dt / 2` together with its relative distance
/// to the one at `dt`.
pub fn step_halving_check(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    dt: f64,
) -> Result<(ScaledPropagator, f64)> {
    let coarse = propagate_protocol(spec, profile, dt)?;
    let fine = propagate_protocol(spec, profile, 0.5 * dt)?;
    let err = relative_distance(&coarse, &fine);
    Ok((fine, err))
}

/// Checks that `rho` is a density matrix to within `tol`.
pub fn validate_density(rho: &CMatrix, tol: f64) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::invalid("rho0", "not square"));
    }
    let skew = max_abs(&(rho - rho.adjoint()));
    if skew > tol {
        return Err(Error::invalid("rho0", format!("not Hermitian ({skew:e})")));
    }
    let tr = rho.trace();
    if (tr - C64::from(1.0)).norm() > tol {
        return Err(Error::invalid("rho0", format!("trace {tr} != 1")));
    }
    let min = hermitian_part(rho)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::invalid("rho0", format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// `U rho0 U^dagger / Tr{...}` for an already computed propagator. The scale
/// factor cancels in the ratio and is never applied.
pub fn evolve_density_with(prop: &ScaledPropagator, rho0: &CMatrix) -> Result<CMatrix> {
    if rho0.nrows() != prop.dim() {
        return Err(Error::invalid("rho0", "dimension does not match the chain"));
    }
    let out = &prop.matrix * rho0 * prop.matrix.adjoint();
    let tr = out.trace().re;
    if !(tr > f64::MIN_POSITIVE) {
        return Err(Error::Extinction {
            context: format!("Tr{{U rho0 U^dagger}} = {tr:e}"),
        });
    }
    Ok(hermitian_part(&out) / C64::from(tr))
}

/// Normalized non-Hermitian evolution of `rho0` over the whole protocol.
pub fn evolve_density(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    rho0: &CMatrix,
    dt: f64,
) -> Result<CMatrix> {
    validate_density(rho0, 1e-10)?;
    let prop = propagate_protocol(spec, profile, dt)?;
    evolve_density_with(&prop, rho0)
}

/// `rho(t)` from the normalized evolution and the state `rho~(t)` obtained
/// when a projective energy measurement precedes it, for a thermal initial
/// state.
pub fn naive_tpm_state(
    spec: &LatticeSpec,
    profile: &DriveProfile,
    beta: f64,
    dt: f64,
) -> Result<(CMatrix, CMatrix)> {
    let basis = EnergyBasis::of_h0(spec)?;
    let prop = propagate_protocol(spec, profile, dt)?;
    naive_tpm_state_with(&basis, &prop, beta)
}

pub fn naive_tpm_state_with(
    basis: &EnergyBasis,
    prop: &ScaledPropagator,
    beta: f64,
) -> Result<(CMatrix, CMatrix)> {
    let weights = gibbs_weights(basis.energies(), beta)?;
    let rho0 = basis.diagonal_operator(&weights);
    let rho = evolve_density_with(prop, &rho0)?;

    let n = basis.dim();
    let mut measured = CMatrix::zeros(n, n);
    for (k, &p) in weights.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let psi = &prop.matrix * basis.vectors().column(k);
        let norm = psi.norm_squared();
        if !(norm > f64::MIN_POSITIVE) {
            return Err(Error::Extinction {
                context: format!("eigenstate {k} annihilated"),
            });
        }
        measured += &psi * psi.adjoint() * C64::from(p / norm);
    }
    Ok((rho, hermitian_part(&measured)))
}

/// `Tr{rho^2}`.
pub fn purity(rho: &CMatrix) -> f64 {
    (rho * rho).trace().re
}

/// Trace distance `||a - b||_1 / 2` of two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_part(&(a - b))
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}
