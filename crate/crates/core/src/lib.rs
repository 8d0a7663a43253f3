//! Two-stage Galerkin spectral approximation with a dissipative perturbation.
//!
//! Stage one computes `σ(T, L_m)` and picks the eigenvectors whose
//! eigenvalues lie in a window `Δ`; stage two solves `T + iQ` on a larger
//! trial space, where genuine eigenvalues reappear near `λ + i` and spectral
//! pollution does not.

pub mod analysis;
pub mod cli;
pub mod dissipative;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod problems;

pub use error::{Error, Result};
