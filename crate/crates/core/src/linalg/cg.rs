//! Jacobi-preconditioned conjugate gradient for the PSD systems built from
//! [`SddMatrix`].
//!
//! Components of the coupling graph that carry no diagonal term make the
//! matrix singular; iterates, residuals and preconditioned residuals are
//! kept orthogonal to the constant vector of each such component.

use crate::error::{check_finite, check_len, GlsError, Result};
use crate::linalg::sdd::SddMatrix;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative size of the null-space component of `b` above which the system
/// is reported as inconsistent.
pub const INCONSISTENCY_TOL: f64 = 1e-6;

pub fn default_max_iters(n: usize) -> usize {
    10 * n + 200
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// `||M x - b|| / ||b||`, recomputed from the returned `x`.
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solves `M x = b` to relative residual `tol`, or returns the best effort
/// after `max_iters` iterations.
pub fn solve_sdd(m: &SddMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<SolveOutcome> {
    solve_sdd_from(m, b, None, tol, max_iters)
}

/// As [`solve_sdd`], starting from `x0` when given.
pub fn solve_sdd_from(
    m: &SddMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<SolveOutcome> {
    let n = m.n();
    check_len(n, b.len())?;
    check_finite(b, "right-hand side")?;
    if let Some(x0) = x0 {
        check_len(n, x0.len())?;
        check_finite(x0, "initial guess")?;
    }
    if !(tol > 0.0) {
        return Err(GlsError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }

    let floating = m.components().floating_members();
    let project = |v: &mut [f64]| {
        for comp in &floating {
            let mean = comp.iter().map(|&i| v[i]).sum::<f64>() / comp.len() as f64;
            for &i in comp {
                v[i] -= mean;
            }
        }
    };

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(SolveOutcome {
            x: vec![0.0; n],
            relative_residual: 0.0,
            iterations: 0,
        });
    }
    let mut bp = b.to_vec();
    project(&mut bp);
    let defect = norm(&sub(b, &bp)) / b_norm;
    if defect > INCONSISTENCY_TOL {
        return Err(GlsError::InconsistentRhs(defect));
    }

    let mut inv_diag = vec![0.0; n];
    m.accumulate_diagonal(1.0, &mut inv_diag);
    for d in inv_diag.iter_mut() {
        *d = if *d > 0.0 { 1.0 / *d } else { 1.0 };
    }

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    project(&mut x);
    let mut r = residual(m, &bp, &x);
    project(&mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let target = tol * b_norm;
    let mut iterations = 0;

    while iterations < max_iters {
        if norm(&r) <= target {
            break;
        }
        q.iter_mut().for_each(|v| *v = 0.0);
        m.accumulate_apply(|j| p[j], 1.0, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        iterations += 1;
        if iterations % 50 == 0 {
            r = residual(m, &bp, &x);
        }
        project(&mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        if rz == 0.0 {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    project(&mut x);
    let relative_residual = norm(&residual(m, b, &x)) / b_norm;
    Ok(SolveOutcome {
        x,
        relative_residual,
        iterations,
    })
}

fn residual(m: &SddMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    m.accumulate_apply(|j| x[j], -1.0, &mut r);
    r
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{dense_solve, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let m = SddMatrix::identity(4);
        let b = [1.0, -2.0, 0.5, 3.0];
        let out = solve_sdd(&m, &b, 1e-12, 100).unwrap();
        for (x, y) in out.x.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn grounded_path() {
        let m = SddMatrix::assemble_laplacian(3, &[(0, 1, 1.0), (1, 2, 1.0)], &[(2, 1.0)]).unwrap();
        // dense oracle: [[1,-1,0],[-1,2,-1],[0,-1,2]] x = (0,0,1) -> (1,1,1)
        let dense = DenseMatrix::from_row_major(3, 3, vec![1., -1., 0., -1., 2., -1., 0., -1., 2.]).unwrap();
        let oracle = dense_solve(&dense, &[0.0, 0.0, 1.0]).unwrap();
        let out = solve_sdd(&m, &[0.0, 0.0, 1.0], 1e-12, 100).unwrap();
        for ((x, y), z) in out.x.iter().zip(&oracle).zip(&[1.0, 1.0, 1.0]) {
            assert!((x - y).abs() < 1e-9);
            assert!((x - z).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_consistent_single_edge() {
        let m = SddMatrix::assemble_laplacian(2, &[(0, 1, 1.0)], &[]).unwrap();
        let out = solve_sdd(&m, &[1.0, -1.0], 1e-9, 100).unwrap();
        assert!((out.x[0] - out.x[1] - 1.0).abs() < 1e-9);
        assert!(out.relative_residual <= 1e-9);
    }

    #[test]
    fn inconsistent_rhs_is_rejected() {
        let m = SddMatrix::assemble_laplacian(2, &[(0, 1, 1.0)], &[]).unwrap();
        assert!(matches!(
            solve_sdd(&m, &[1.0, 0.0], 1e-9, 100),
            Err(GlsError::InconsistentRhs(_))
        ));
    }

    #[test]
    fn rejects_non_finite_input() {
        let m = SddMatrix::identity(2);
        assert!(matches!(
            solve_sdd(&m, &[f64::NAN, 0.0], 1e-9, 100),
            Err(GlsError::NonFinite(_))
        ));
    }

    #[test]
    fn random_systems_meet_tolerance_and_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(2..30);
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.random_range(0..v), v, rng.random_range(0.1..10.0)));
            }
            for _ in 0..n {
                let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
                if u != v {
                    edges.push((u, v, rng.random_range(0.1..10.0)));
                }
            }
            let diag = if rng.random_bool(0.5) { vec![(0, 0.5)] } else { vec![] };
            let m = SddMatrix::assemble_laplacian(n, &edges, &diag).unwrap();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if diag.is_empty() {
                let mean = b.iter().sum::<f64>() / n as f64;
                b.iter_mut().for_each(|v| *v -= mean);
            }
            let a = solve_sdd(&m, &b, 1e-10, default_max_iters(n)).unwrap();
            let again = solve_sdd(&m, &b, 1e-10, default_max_iters(n)).unwrap();
            assert!(a.relative_residual <= 1e-10, "{}", a.relative_residual);
            assert_eq!(a, again);
            let mx = m.apply(&a.x).unwrap();
            let r = norm(&sub(&mx, &b)) / norm(&b);
            assert!(r <= a.relative_residual * (1.0 + 1e-6) + 1e-15);
        }
    }

    #[test]
    fn max_iters_reports_achieved_residual() {
        let n = 50;
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v, 1.0)).collect();
        let m = SddMatrix::assemble_laplacian(n, &edges, &[(0, 1e-3)]).unwrap();
        let b = vec![1.0; n];
        let out = solve_sdd(&m, &b, 1e-14, 3).unwrap();
        assert_eq!(out.iterations, 3);
        assert!(out.relative_residual > 1e-14);
    }
}
