//! Single-excitation matrices of the Su-Schrieffer-Heeger chain and its
//! nonreciprocal and loss/gain perturbations, plus the drive profiles that
//! switch the perturbations on and off.
//!
//! Sites are 0-based; unit cell `k` occupies sites `(2k, 2k + 1)` and the
//! even sites form sublattice A. Energies are measured in units of the
//! intra-cell hopping `g1`, times in `1/g1`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Nonreciprocal,
    LossGain,
}

/// Chain geometry, couplings and the set of active non-Hermitian terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSpec {
    pub sites: usize,
    pub g1: f64,
    pub g2: f64,
    pub gamma: f64,
    pub delta: f64,
    pub boundary: Boundary,
    pub terms: BTreeSet<Term>,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec {
            sites: 20,
            g1: 1.0,
            g2: 1.5,
            gamma: 0.0,
            delta: 0.0,
            boundary: Boundary::Open,
            terms: BTreeSet::from([Term::Nonreciprocal]),
        }
    }
}

impl LatticeSpec {
    /// Open chain with `sites` sites and only the nonreciprocal term active.
    pub fn nonreciprocal(sites: usize, g2: f64, gamma: f64) -> Self {
        LatticeSpec {
            sites,
            g2,
            gamma,
            ..Default::default()
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Sets `delta` and activates the loss/gain term.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self.terms.insert(Term::LossGain);
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Same chain with every non-Hermitian strength set to zero.
    pub fn hermitian(&self) -> Self {
        LatticeSpec {
            gamma: 0.0,
            delta: 0.0,
            ..self.clone()
        }
    }

    pub fn is_active(&self, term: Term) -> bool {
        self.terms.contains(&term)
    }

    /// True when no active term has a nonzero strength.
    pub fn is_hermitian(&self) -> bool {
        let nr = self.is_active(Term::Nonreciprocal) && self.gamma != 0.0;
        let lg = self.is_active(Term::LossGain) && self.delta != 0.0;
        !(nr || lg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::invalid("sites", format!("{} < 2", self.sites)));
        }
        if self.sites % 2 != 0 {
            return Err(Error::invalid("sites", format!("{} is odd", self.sites)));
        }
        if !(self.g1.is_finite() && self.g1 > 0.0) {
            return Err(Error::invalid("g1", format!("{} must be > 0", self.g1)));
        }
        for (name, v) in [("g2", self.g2), ("gamma", self.gamma), ("delta", self.delta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveShape {
    /// `f(t) = sin(pi (t mod T) / T)` on every round.
    #[serde(alias = "slow")]
    SlowSine,
    /// `f(t) = 1` on the whole window.
    Sudden,
}

impl DriveShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriveShape::SlowSine => "slow_sine",
            DriveShape::Sudden => "sudden",
        }
    }
}

/// Control function switching the non-Hermitian terms on and off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveProfile {
    pub shape: DriveShape,
    pub t_total: f64,
    pub rounds: u32,
}

impl Default for DriveProfile {
    fn default() -> Self {
        DriveProfile {
            shape: DriveShape::SlowSine,
            t_total: 500.0,
            rounds: 1,
        }
    }
}

impl DriveProfile {
    pub fn new(shape: DriveShape, t_total: f64, rounds: u32) -> Self {
        DriveProfile {
            shape,
            t_total,
            rounds,
        }
    }

    pub fn slow(t_total: f64) -> Self {
        Self::new(DriveShape::SlowSine, t_total, 1)
    }

    pub fn sudden(t_total: f64) -> Self {
        Self::new(DriveShape::Sudden, t_total, 1)
    }

    pub fn with_rounds(mut self, rounds: u32) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_total.is_finite() && self.t_total > 0.0) {
            return Err(Error::invalid("t_total", format!("{} must be > 0", self.t_total)));
        }
        if self.rounds < 1 {
            return Err(Error::invalid("rounds", "must be >= 1"));
        }
        Ok(())
    }

    /// End of the protocol, `rounds * t_total`.
    pub fn t_final(&self) -> f64 {
        self.rounds as f64 * self.t_total
    }

    /// Control amplitude `f(t)`. Zero outside `[0, t_final]`; the slow
    /// profile is exactly zero at every round boundary.
    pub fn amplitude(&self, t: f64) -> f64 {
        if !(0.0..=self.t_final()).contains(&t) {
            return 0.0;
        }
        match self.shape {
            DriveShape::Sudden => 1.0,
            DriveShape::SlowSine => {
                let phase = t.rem_euclid(self.t_total);
                // round boundaries reached through rounds * t_total can land
                // a few ulps to either side
                let slack = 4.0 * f64::EPSILON * t.max(self.t_total);
                if phase <= slack || self.t_total - phase <= slack {
                    0.0
                } else {
                    (PI * phase / self.t_total).sin()
                }
            }
        }
    }
}

/// Hermitian SSH hopping matrix.
pub fn build_h0(spec: &LatticeSpec) -> Result<CMatrix> {
    spec.validate()?;
    let l = spec.sites;
    let mut h = CMatrix::zeros(l, l);
    for a in (0..l).step_by(2) {
        let b = a + 1;
        h[(a, b)] += C64::from(spec.g1);
        h[(b, a)] += C64::from(spec.g1);
        let next = b + 1;
        if next < l {
            h[(b, next)] += C64::from(spec.g2);
            h[(next, b)] += C64::from(spec.g2);
        }
    }
    if spec.boundary == Boundary::Periodic {
        h[(l - 1, 0)] += C64::from(spec.g2);
        h[(0, l - 1)] += C64::from(spec.g2);
    }
    Ok(h)
}

/// Nonreciprocal intra-cell hopping: `+gamma/2` on `(2n, 2n+1)` and
/// `-gamma/2` on `(2n+1, 2n)`.
pub fn build_h_nr(spec: &LatticeSpec) -> Result<CMatrix> {
    spec.validate()?;
    let l = spec.sites;
    let half = 0.5 * spec.gamma;
    let mut h = CMatrix::zeros(l, l);
    for a in (0..l).step_by(2) {
        h[(a, a + 1)] = C64::from(half);
        h[(a + 1, a)] = C64::from(-half);
    }
    Ok(h)
}

/// Balanced gain on sublattice A and loss on sublattice B.
pub fn build_h_lg(spec: &LatticeSpec) -> Result<CMatrix> {
    spec.validate()?;
    let l = spec.sites;
    let mut h = CMatrix::zeros(l, l);
    for a in (0..l).step_by(2) {
        h[(a, a)] = C64::new(0.0, spec.delta);
        h[(a + 1, a + 1)] = C64::new(0.0, -spec.delta);
    }
    Ok(h)
}

/// Sum of the active non-Hermitian terms at full strength.
pub fn build_h_nh(spec: &LatticeSpec) -> Result<CMatrix> {
    spec.validate()?;
    let mut h = CMatrix::zeros(spec.sites, spec.sites);
    if spec.is_active(Term::Nonreciprocal) {
        h += build_h_nr(spec)?;
    }
    if spec.is_active(Term::LossGain) {
        h += build_h_lg(spec)?;
    }
    Ok(h)
}

/// Precomputed `H0` and full-strength non-Hermitian part, so that `H(t)`
/// costs one scaled addition.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    pub h0: CMatrix,
    pub h_nh: CMatrix,
}

impl HamiltonianParts {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        Ok(HamiltonianParts {
            h0: build_h0(spec)?,
            h_nh: build_h_nh(spec)?,
        })
    }

    pub fn at_amplitude(&self, f: f64) -> CMatrix {
        if f == 0.0 {
            return self.h0.clone();
        }
        &self.h0 + &self.h_nh * C64::from(f)
    }
}

/// `H(t) = H0 + f(t) (H_nr + H_lg)`, restricted to the active terms.
pub fn hamiltonian_at(spec: &LatticeSpec, profile: &DriveProfile, t: f64) -> Result<CMatrix> {
    profile.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", format!("{t} must be >= 0")));
    }
    Ok(HamiltonianParts::new(spec)?.at_amplitude(profile.amplitude(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn h0_band_for_four_sites() {
        let spec = LatticeSpec::nonreciprocal(4, 1.5, 0.0);
        let h = build_h0(&spec).unwrap();
        assert_eq!(h[(0, 1)], C64::from(1.0));
        assert_eq!(h[(1, 2)], C64::from(1.5));
        assert_eq!(h[(2, 3)], C64::from(1.0));
        for i in 0..4 {
            assert_eq!(h[(i, i)], C64::from(0.0));
        }
        assert_eq!(h[(0, 3)], C64::from(0.0));
        assert_eq!(h, h.adjoint());
    }

    #[test]
    fn periodic_wraps_last_bond() {
        let spec = LatticeSpec::nonreciprocal(6, 1.5, 0.0).with_boundary(Boundary::Periodic);
        let h = build_h0(&spec).unwrap();
        assert_eq!(h[(5, 0)], C64::from(1.5));
        assert_eq!(h[(0, 5)], C64::from(1.5));
    }

    #[test]
    fn dimer_h0_eigenvalues() {
        let spec = LatticeSpec::nonreciprocal(2, 7.0, 0.0);
        let h = build_h0(&spec).unwrap().map(|z| z.re);
        let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_h0(&LatticeSpec::nonreciprocal(3, 1.5, 0.0)).is_err());
        assert!(build_h0(&LatticeSpec::nonreciprocal(0, 1.5, 0.0)).is_err());
        assert!(build_h_nr(&LatticeSpec::nonreciprocal(5, 1.5, 1.0)).is_err());
        assert!(build_h_lg(&LatticeSpec::nonreciprocal(1, 1.5, 1.0)).is_err());
        let mut spec = LatticeSpec::default();
        spec.g1 = 0.0;
        assert!(spec.validate().is_err());
        spec.g1 = 1.0;
        spec.delta = -0.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn nonreciprocal_dimer() {
        let spec = LatticeSpec::nonreciprocal(2, 1.5, 2.0);
        let h = build_h_nr(&spec).unwrap();
        assert_eq!(h[(0, 1)], C64::from(1.0));
        assert_eq!(h[(1, 0)], C64::from(-1.0));
        assert_eq!(max_abs(&(&h + h.transpose())), 0.0);
    }

    #[test]
    fn loss_gain_dimer() {
        let spec = LatticeSpec::nonreciprocal(2, 1.5, 0.0).with_delta(0.3);
        let h = build_h_lg(&spec).unwrap();
        assert_eq!(h[(0, 0)], C64::new(0.0, 0.3));
        assert_eq!(h[(1, 1)], C64::new(0.0, -0.3));
        assert_eq!(h.trace(), C64::from(0.0));
        let zero = build_h_lg(&LatticeSpec::nonreciprocal(8, 1.5, 0.0).with_delta(0.0)).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
    }

    #[test]
    fn slow_profile_values() {
        let spec = LatticeSpec::nonreciprocal(8, 1.5, 1.3);
        let p = DriveProfile::slow(10.0);
        assert_eq!(hamiltonian_at(&spec, &p, 0.0).unwrap(), build_h0(&spec).unwrap());
        let mid = hamiltonian_at(&spec, &p, 5.0).unwrap();
        let want = build_h0(&spec).unwrap() + build_h_nr(&spec).unwrap();
        assert!(max_abs(&(mid - want)) < 1e-15);
        let two = p.with_rounds(2);
        assert_eq!(two.amplitude(20.0), 0.0);
        assert_eq!(two.amplitude(10.0), 0.0);
        assert!((two.amplitude(15.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sudden_profile_values() {
        let spec = LatticeSpec::nonreciprocal(8, 1.5, 1.3).with_delta(0.2);
        let p = DriveProfile::sudden(9.0);
        let h = hamiltonian_at(&spec, &p, 3.0).unwrap();
        let want = build_h0(&spec).unwrap() + build_h_nr(&spec).unwrap() + build_h_lg(&spec).unwrap();
        assert_eq!(h, want);
        assert_eq!(p.amplitude(9.5), 0.0);
        assert!(hamiltonian_at(&spec, &p, -1.0).is_err());
    }

    #[test]
    fn inactive_terms_are_ignored() {
        let mut spec = LatticeSpec::nonreciprocal(6, 1.5, 1.0).with_delta(0.4);
        spec.terms.clear();
        let h = hamiltonian_at(&spec, &DriveProfile::sudden(1.0), 0.5).unwrap();
        assert_eq!(h, build_h0(&spec).unwrap());
    }

    #[test]
    fn drive_validation() {
        assert!(DriveProfile::slow(0.0).validate().is_err());
        assert!(DriveProfile::slow(1.0).with_rounds(0).validate().is_err());
    }
}
