//! Work statistics of non-Hermitian evolutions whose Hamiltonian is Hermitian
//! at both endpoints.
//!
//! The thermal initial state is purified with orthonormal bath labels, the
//! chain evolves under `H0 + f(t) H_nh`, and the final measurement is taken
//! jointly on the `H0` eigenbasis and the bath labels. The resulting
//! transition probabilities are normalized by the total-state norm rather
//! than by per-trajectory norms, which makes the statistics well defined
//! across the exceptional point. The [`oracle`] module checks the closed
//! form against an explicit system-bath state and against a unitary dilation
//! with post-selected ancillas.

pub mod cli;
pub mod config;
pub mod error;
pub mod evolve;
pub mod experiment;
mod linalg;
pub mod model;
pub mod oracle;
pub mod output;
pub mod spectral;
pub mod thermal;
pub mod workstats;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix in site representation.
pub type CMatrix = nalgebra::DMatrix<C64>;
