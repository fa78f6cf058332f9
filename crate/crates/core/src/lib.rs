//! Solver and calculus for the complex k-Hessian equation
//! (omega + i ddbar phi)^k wedge omega^{n-k} = f omega^n on the flat
//! complex torus, built on the normalized elementary symmetric functions
//! S_k and their Gamma_k cones.
//!
//! Layers, bottom up:
//! - [`symfunc`]: S_k on eigenvalue vectors, cone membership, derivatives,
//!   and the full inequality battery (Newton, Maclaurin, Garding, ...).
//! - [`herm`]: the same calculus on Hermitian matrices via cyclic Jacobi
//!   eigendecomposition, derivative matrices, and polarization.
//! - [`grid`]: periodic fields, spectral complex Hessians, gradients, and
//!   the flat Laplacian inverse.
//! - [`operator`]: the nonlinear operator S_k(I + Phi), its log-form
//!   linearization, the uniqueness energy identity, and estimate monitors.
//! - [`solver`]: continuity method with cone-preserving damped Newton and
//!   a preconditioned BiCGStab inner solver.
//! - [`mms`], [`io`]: manufactured test problems and the field file format.

pub mod error;
pub mod fft;
pub mod grid;
pub mod herm;
pub mod io;
pub mod mms;
pub mod operator;
pub mod props;
pub mod solver;
pub mod symfunc;

pub use error::{Error, Result};
