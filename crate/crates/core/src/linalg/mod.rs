//! Sparse PSD matrices and the linear-system solvers every algorithm calls.

pub mod cg;
pub mod dense;
pub mod sdd;
mod sparse_vec;

pub use cg::{default_max_iters, solve_sdd, solve_sdd_from, SolveOutcome, DEFAULT_TOL};
pub use dense::{dense_solve, DenseMatrix};
pub use sdd::{Components, Edge, Row, SddMatrix, SquaredForm};
pub use sparse_vec::SparseVector;
