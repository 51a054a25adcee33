//! Karcher (Riemannian geometric) mean of symmetric positive definite
//! matrices.
//!
//! The main solver is a parameter-free majorization-minimization iteration
//! ([`solvers::mm_solve`]); gradient descent with and without backtracking is
//! provided as a baseline. [`oracle`] holds closed-form and brute-force
//! references, and [`experiment`] regenerates the convergence studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod checks;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod io;
pub mod objective;
pub mod oracle;
pub mod solvers;
pub mod spd;

pub use eigen::{sym_eig, EigenPair};
pub use error::{KarcherError, Result};
pub use objective::{
    euclidean_gradient, f1, f2, g1_scalar, g2_scalar, grad_direction, gradient_sum, objective,
    surrogate_coeffs, surrogate_minimizer, surrogate_value, Ensemble, SurrogateCoeffs,
};
pub use solvers::{
    arithmetic_mean_init, gd_fixed_step_solve, gd_linesearch_solve, mm_solve, mm_step, solve,
    SolverConfig, SolverKind, SolverResult, Termination, TraceRecord,
};
pub use spd::{
    congruence, exp_m, frob_inner, geodesic, inv_m, inv_sqrt_m, log_m, matrix_fn, pow_m, riem_dist,
    sqrt_m, symmetrize, SpdMatrix,
};
