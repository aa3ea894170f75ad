//! Newton systems of the barrier function.
//!
//! With `D_i = y_i^2 - q_i`, `q_i = ||x - s_i||^2_{L_i}` and
//! `u_i = L_i (x - s_i)`, the Hessian blocks of group `i` are
//!
//! ```text
//! H_xx = (2/D) L + (4/D^2) u u^T,  H_xy = -(4y/D^2) u,  H_yy = 2(y^2 + q)/D^2.
//! ```
//!
//! Eliminating every `y_i` leaves `sum_i (alpha_i L_i - beta_i u_i u_i^T)`
//! with `alpha_i = 2/D_i` and `beta_i = 4/(D_i (y_i^2 + q_i))`. The low-rank
//! route solves it with `A = sum_i alpha_i L_i` as base and the `k` rank-one
//! terms through Sherman-Morrison-Woodbury. For many groups the folded route
//! assembles each small group's block directly into a sparse matrix, keeps
//! only the wide groups as low-rank terms and factors the base by sparse
//! Cholesky.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{check_len, GlsError, Result};
use crate::instance::{Group, Instance};
use crate::linalg::{default_max_iters, dense_solve, solve_sdd, DenseMatrix, Row};

use super::BarrierPoint;

/// Groups above this many rows stay low-rank in the folded route.
const FOLD_MAX_ROWS: usize = 32;

/// `Auto` uses the low-rank route up to this many groups.
const LOW_RANK_MAX_GROUPS: usize = 32;

const REFINE_TARGET: f64 = 1e-11;
const REFINE_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianMethod {
    #[default]
    Auto,
    /// Base `sum_i alpha_i L_i` solved by conjugate gradient, all `k`
    /// corrections through Sherman-Morrison-Woodbury.
    LowRank,
    /// Small groups folded into a sparse base factored by Cholesky.
    Folded,
}

/// Per-group barrier curvature at a point.
#[derive(Debug, Clone)]
pub(crate) struct Curvature {
    pub q: Vec<f64>,
    pub d: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curvature {
    pub fn at(inst: &Instance, p: &BarrierPoint) -> Result<Self> {
        check_len(inst.n(), p.x.len())?;
        check_len(inst.k(), p.y.len())?;
        let q = inst.groups().iter().map(|g| g.residual_sq(&p.x)).collect::<Vec<_>>();
        let mut d = Vec::with_capacity(q.len());
        for (i, (&qi, &yi)) in q.iter().zip(&p.y).enumerate() {
            let di = yi * yi - qi;
            if !(yi > 0.0 && di > 0.0) {
                return Err(GlsError::Infeasible { group: i, slack: di });
            }
            d.push(di);
        }
        Ok(Self { q, d, y: p.y.clone() })
    }

    fn alpha(&self, i: usize) -> f64 {
        2.0 / self.d[i]
    }

    fn beta(&self, i: usize) -> f64 {
        4.0 / (self.d[i] * (self.y[i] * self.y[i] + self.q[i]))
    }

    /// `2 / (y^2 + q)`: curvature of the folded block along `u`.
    fn gamma(&self, i: usize) -> f64 {
        2.0 / (self.y[i] * self.y[i] + self.q[i])
    }

    fn hxx_rank_one(&self, i: usize) -> f64 {
        4.0 / (self.d[i] * self.d[i])
    }

    fn hxy(&self, i: usize) -> f64 {
        -4.0 * self.y[i] / (self.d[i] * self.d[i])
    }

    fn hyy(&self, i: usize) -> f64 {
        2.0 * (self.y[i] * self.y[i] + self.q[i]) / (self.d[i] * self.d[i])
    }

    /// `H_xy / H_yy = -2y / (y^2 + q)`.
    fn coupling_ratio(&self, i: usize) -> f64 {
        -2.0 * self.y[i] / (self.y[i] * self.y[i] + self.q[i])
    }
}

/// `u^T z = (x - s)^T L z`.
fn u_dot(g: &Group, x: &[f64], z: &[f64]) -> f64 {
    let s = g.potentials();
    g.matrix()
        .rows()
        .map(|r| r.weight() * r.dot(|j| x[j] - s.get(j)) * r.dot(|j| z[j]))
        .sum()
}

fn dense_u(g: &Group, x: &[f64], scale: f64) -> Vec<f64> {
    let mut u = vec![0.0; x.len()];
    g.accumulate_gradient(x, scale, &mut u);
    u
}

/// `H (dx, dy)` for the full `(n + k)`-dimensional Hessian.
pub(crate) fn hessian_apply(
    inst: &Instance,
    curv: &Curvature,
    x: &[f64],
    dx: &[f64],
    dy: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut hx = vec![0.0; inst.n()];
    let mut hy = vec![0.0; inst.k()];
    for (i, g) in inst.groups().iter().enumerate() {
        g.matrix().accumulate_apply(|j| dx[j], curv.alpha(i), &mut hx);
        let ud = u_dot(g, x, dx);
        let coeff = curv.hxx_rank_one(i) * ud + curv.hxy(i) * dy[i];
        g.accumulate_gradient(x, coeff, &mut hx);
        hy[i] = curv.hxy(i) * ud + curv.hyy(i) * dy[i];
    }
    (hx, hy)
}

/// Solves the reduced `n x n` system for a right-hand side.
trait ReducedSolver {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>>;
}

/// Reduces `(rx, ry)`, solves for `dx` and back-substitutes `dy`.
fn eliminate_and_solve(
    inst: &Instance,
    curv: &Curvature,
    x: &[f64],
    solver: &dyn ReducedSolver,
    rx: &[f64],
    ry: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = rx.to_vec();
    for (i, g) in inst.groups().iter().enumerate() {
        if ry[i] != 0.0 {
            g.accumulate_gradient(x, -curv.coupling_ratio(i) * ry[i], &mut r);
        }
    }
    let dx = solver.solve(&r)?;
    let dy = inst
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| ry[i] / curv.hyy(i) - curv.coupling_ratio(i) * u_dot(g, x, &dx))
        .collect();
    Ok((dx, dy))
}

/// Sherman-Morrison-Woodbury on `B - C C^T` given a solver for `B`.
struct Woodbury<F: Fn(&[f64]) -> Result<Vec<f64>>> {
    base: F,
    c: Vec<Vec<f64>>,
    /// `B^{-1} c_j`.
    z: Vec<Vec<f64>>,
    /// `I - C^T B^{-1} C`.
    inner: DenseMatrix,
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> Woodbury<F> {
    fn new(base: F, c: Vec<Vec<f64>>) -> Result<Self> {
        let z = c.iter().map(|cj| base(cj)).collect::<Result<Vec<_>>>()?;
        let m = c.len();
        let mut inner = DenseMatrix::identity(m);
        for a in 0..m {
            for b in 0..m {
                inner.add(a, b, -dot(&c[a], &z[b]));
            }
        }
        // symmetrize against rounding in the inexact base solves
        for a in 0..m {
            for b in a + 1..m {
                let v = 0.5 * (inner.get(a, b) + inner.get(b, a));
                inner.set(a, b, v);
                inner.set(b, a, v);
            }
        }
        Ok(Self { base, c, z, inner })
    }
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> ReducedSolver for Woodbury<F> {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = (self.base)(r)?;
        if self.c.is_empty() {
            return Ok(out);
        }
        let proj: Vec<f64> = self.c.iter().map(|cj| dot(cj, &out)).collect();
        let m = dense_solve(&self.inner, &proj)?;
        for (zj, mj) in self.z.iter().zip(&m) {
            for (o, v) in out.iter_mut().zip(zj) {
                *o += mj * v;
            }
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn low_rank_solver(
    inst: &Instance,
    curv: &Curvature,
    x: &[f64],
    tol: f64,
) -> Result<Box<dyn ReducedSolver>> {
    let alpha: Vec<f64> = (0..inst.k()).map(|i| curv.alpha(i)).collect();
    let a = inst.combined_matrix(&alpha)?;
    let c = inst
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| dense_u(g, x, curv.beta(i).sqrt()))
        .collect();
    let max_iters = default_max_iters(inst.n());
    let base = move |r: &[f64]| -> Result<Vec<f64>> { Ok(solve_sdd(&a, r, tol, max_iters)?.x) };
    Ok(Box::new(Woodbury::new(base, c)?))
}

fn push_row_outer(coo: &mut CooMatrix<f64>, a: Row<'_>, b: Row<'_>, scale: f64) {
    a.for_each_coeff(|j, cj| b.for_each_coeff(|l, cl| coo.push(j, l, scale * cj * cl)));
}

fn folded_solver(inst: &Instance, curv: &Curvature, x: &[f64]) -> Result<Box<dyn ReducedSolver>> {
    let n = inst.n();
    let mut coo = CooMatrix::new(n, n);
    let mut diag = vec![0.0; n];
    let mut wide = Vec::new();
    for (i, g) in inst.groups().iter().enumerate() {
        let m = g.matrix();
        let alpha = curv.alpha(i);
        if m.nnz_rows() > FOLD_MAX_ROWS {
            for r in m.rows() {
                push_row_outer(&mut coo, r, r, alpha * r.weight());
            }
            m.accumulate_diagonal(alpha, &mut diag);
            wide.push(dense_u(g, x, curv.beta(i).sqrt()));
            continue;
        }
        // block = W^{1/2} C^T [alpha (I - v v^T) + gamma v v^T] C W^{1/2}
        // with v the unit direction of W^{1/2} C (x - s)
        let s = g.potentials();
        let rows: Vec<Row<'_>> = m.rows().collect();
        let sw: Vec<f64> = rows.iter().map(|r| r.weight().sqrt()).collect();
        let mut v: Vec<f64> = rows
            .iter()
            .zip(&sw)
            .map(|(r, w)| w * r.dot(|j| x[j] - s.get(j)))
            .collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|a| *a /= norm);
        } else {
            v.iter_mut().for_each(|a| *a = 0.0);
        }
        let gamma = curv.gamma(i);
        for a in 0..rows.len() {
            for b in 0..rows.len() {
                let delta = if a == b { 1.0 } else { 0.0 };
                let mid = alpha * (delta - v[a] * v[b]) + gamma * v[a] * v[b];
                if mid != 0.0 {
                    push_row_outer(&mut coo, rows[a], rows[b], sw[a] * sw[b] * mid);
                }
            }
        }
        m.accumulate_diagonal(alpha, &mut diag);
    }
    // pin one vertex of every component without a diagonal term; exact for
    // right-hand sides orthogonal to the component's constant vector
    let alpha: Vec<f64> = (0..inst.k()).map(|i| curv.alpha(i)).collect();
    let comps = inst.combined_matrix(&alpha)?.components();
    for members in comps.floating_members() {
        let scale = members.iter().map(|&j| diag[j]).fold(0.0, f64::max);
        coo.push(members[0], members[0], if scale > 0.0 { scale } else { 1.0 });
    }
    for j in 0..n {
        coo.push(j, j, 0.0);
    }
    let csc = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&csc).map_err(|_| GlsError::Singular)?;
    let base = move |r: &[f64]| -> Result<Vec<f64>> {
        let sol = chol.solve(&DMatrix::from_column_slice(r.len(), 1, r));
        Ok(sol.as_slice().to_vec())
    };
    Ok(Box::new(Woodbury::new(base, wide)?))
}

/// Solves `H (dx, dy) = (rhs_x, rhs_y)` at a strictly feasible point.
pub fn hessian_solve(
    inst: &Instance,
    p: &BarrierPoint,
    rhs_x: &[f64],
    rhs_y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    hessian_solve_with(inst, p, rhs_x, rhs_y, HessianMethod::Auto, 1e-12)
}

/// As [`hessian_solve`] with an explicit route and inner solve tolerance.
pub fn hessian_solve_with(
    inst: &Instance,
    p: &BarrierPoint,
    rhs_x: &[f64],
    rhs_y: &[f64],
    method: HessianMethod,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let curv = Curvature::at(inst, p)?;
    solve_at(inst, &curv, &p.x, rhs_x, rhs_y, method, tol)
}

pub(crate) fn solve_at(
    inst: &Instance,
    curv: &Curvature,
    x: &[f64],
    rhs_x: &[f64],
    rhs_y: &[f64],
    method: HessianMethod,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(inst.n(), rhs_x.len())?;
    check_len(inst.k(), rhs_y.len())?;
    let rhs_norm = (dot(rhs_x, rhs_x) + dot(rhs_y, rhs_y)).sqrt();
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; inst.n()], vec![0.0; inst.k()]));
    }
    let solver = match method {
        HessianMethod::LowRank => low_rank_solver(inst, curv, x, tol)?,
        HessianMethod::Folded => folded_solver(inst, curv, x)?,
        HessianMethod::Auto if inst.k() <= LOW_RANK_MAX_GROUPS => low_rank_solver(inst, curv, x, tol)?,
        HessianMethod::Auto => match folded_solver(inst, curv, x) {
            Ok(s) => s,
            Err(GlsError::Singular) => low_rank_solver(inst, curv, x, tol)?,
            Err(e) => return Err(e),
        },
    };
    let (mut dx, mut dy) = eliminate_and_solve(inst, curv, x, solver.as_ref(), rhs_x, rhs_y)?;
    for _ in 0..REFINE_STEPS {
        let (hx, hy) = hessian_apply(inst, curv, x, &dx, &dy);
        let rx: Vec<f64> = rhs_x.iter().zip(&hx).map(|(a, b)| a - b).collect();
        let ry: Vec<f64> = rhs_y.iter().zip(&hy).map(|(a, b)| a - b).collect();
        let res = (dot(&rx, &rx) + dot(&ry, &ry)).sqrt();
        if !(res > REFINE_TARGET * rhs_norm) {
            break;
        }
        let (cx, cy) = eliminate_and_solve(inst, curv, x, solver.as_ref(), &rx, &ry)?;
        dx.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
        dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
    }
    if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
        return Err(GlsError::Singular);
    }
    Ok((dx, dy))
}

#[cfg(test)]
/// Dense `(n + k) x (n + k)` Hessian, variables ordered `(x, y)`.
pub(crate) fn dense_hessian(inst: &Instance, curv: &Curvature, x: &[f64]) -> DenseMatrix {
    let (n, k) = (inst.n(), inst.k());
    let mut h = DenseMatrix::zeros(n + k, n + k);
    for (i, g) in inst.groups().iter().enumerate() {
        let l = g.matrix().to_dense();
        let u = dense_u(g, x, 1.0);
        for a in 0..n {
            for b in 0..n {
                h.add(a, b, curv.alpha(i) * l.get(a, b) + curv.hxx_rank_one(i) * u[a] * u[b]);
            }
            h.add(a, n + i, curv.hxy(i) * u[a]);
            h.add(n + i, a, curv.hxy(i) * u[a]);
        }
        h.add(n + i, n + i, curv.hyy(i));
    }
    h
}

#[cfg(test)]
/// Dense reduced matrix `sum_i alpha_i L_i - beta_i u_i u_i^T`.
pub(crate) fn dense_reduced(inst: &Instance, curv: &Curvature, x: &[f64]) -> DenseMatrix {
    let n = inst.n();
    let mut m = DenseMatrix::zeros(n, n);
    for (i, g) in inst.groups().iter().enumerate() {
        let l = g.matrix().to_dense();
        let u = dense_u(g, x, 1.0);
        for a in 0..n {
            for b in 0..n {
                m.add(a, b, curv.alpha(i) * l.get(a, b) - curv.beta(i) * u[a] * u[b]);
            }
        }
    }
    m
}
