//! Solvers for the grouped least squares problem
//! `min_x sum_i ||x - s_i||_{L_i}` where each `L_i` is a sparse PSD matrix.
//!
//! Two algorithms are provided:
//! - [`mw`]: a multiplicative-weights scheme that reweights groups and solves
//!   one weighted quadratic minimization per iteration; returns a
//!   `(1 + 10 eps)`-approximate solution.
//! - [`ipm`]: a log-barrier interior point method whose Newton systems are
//!   solved by eliminating the per-group cone variables and applying the
//!   Sherman-Morrison-Woodbury identity.
//!
//! [`modeling`] and [`imaging`] build instances from graphs, point sets and
//! images.

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod instance;
pub mod mw;
pub mod ipm;
pub mod modeling;
pub mod solver;
pub mod imaging;
pub mod gen;

pub use error::{GlsError, Result};
pub use instance::{Group, Instance, Solution, Trace, Weights};
pub use linalg::{SddMatrix, SparseVector};
