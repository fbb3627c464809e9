//! Inexact Rayleigh quotient iteration for large sparse Hermitian eigenproblems.
//!
//! The outer iteration updates the Rayleigh quotient `θ_k = u_k* A u_k` and
//! solves the shifted system `(A - θ_k I) w = u_k` only approximately, to a
//! relative residual `ξ_k` chosen by a [`TolerancePolicy`]. The inner solver is
//! MINRES built on a fully reorthogonalized Lanczos process, optionally
//! preconditioned by a tuned Cholesky preconditioner that satisfies
//! `𝒬 u_k = A u_k`.
//!
//! Module map:
//!
//! - [`matio`]: Matrix Market input and the CSR Hermitian matrix type.
//! - [`lanczos`]: m-step Lanczos on a shifted Hermitian operator.
//! - [`minres`]: MINRES on `(A - θI) w = u` with residual-direction output.
//! - [`tuned_precond`]: base Cholesky preconditioners, rank-one/rank-two tuning
//!   and the preconditioned inner solve.
//! - [`rqi`]: the outer iteration, tolerance policies and trace records.
//! - [`diagnostics`]: dense spectral oracle, angle and rate estimators, and
//!   verifiers for the convergence bounds.
//! - [`generators`]: synthetic test matrices.

pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod lanczos;
pub mod matio;
pub mod minres;
pub mod rqi;
pub mod tuned_precond;
pub mod vector;

pub use error::{Error, Result};
pub use matio::SparseHermitianMatrix;
pub use minres::InnerSolveResult;
pub use rqi::{EigenEstimate, OuterRecord, OuterTrace, RunStatus, SolverConfig, TolerancePolicy};
pub use vector::{c64, DenseVector};

/// Working precision unit roundoff, `2.22e-16`.
pub const EPS_MACH: f64 = f64::EPSILON;
