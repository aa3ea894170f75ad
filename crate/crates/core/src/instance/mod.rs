//! The grouped least squares problem: groups, objectives and the weighted
//! quadratic minimization every solver reduces to.

mod format;
mod solution;

pub use format::{parse_instance, serialize_instance};
pub use solution::{Certificate, IpmRecord, MwRecord, Solution, Trace};

use crate::error::{check_finite, check_len, GlsError, Result};
use crate::linalg::{default_max_iters, solve_sdd_from, SddMatrix, SparseVector};

/// One term `||x - s||_L` of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    l: SddMatrix,
    s: SparseVector,
}

impl Group {
    pub fn new(l: SddMatrix, s: SparseVector) -> Self {
        Self { l, s }
    }

    /// A group with `s = 0`.
    pub fn centered(l: SddMatrix) -> Self {
        Self::new(l, SparseVector::new())
    }

    pub fn matrix(&self) -> &SddMatrix {
        &self.l
    }

    pub fn potentials(&self) -> &SparseVector {
        &self.s
    }

    /// `||x - s||_L^2`.
    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        self.l.quad_form_with(|j| x[j] - self.s.get(j)).max(0.0)
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.residual_sq(x).sqrt()
    }

    /// `out += scale * L (x - s)`.
    pub fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        self.l.accumulate_apply(|j| x[j] - self.s.get(j), scale, out);
    }
}

/// `min_x sum_i ||x - s_i||_{L_i}` over `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    groups: Vec<Group>,
}

impl Instance {
    pub fn new(n: usize, groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return Err(GlsError::InvalidInstance("at least one group is required".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.l.n() != n {
                return Err(GlsError::InvalidInstance(format!(
                    "group {i} has dimension {} but the instance has {n}",
                    g.l.n()
                )));
            }
            if let Some(&(j, _)) = g.s.entries().last() {
                if j >= n {
                    return Err(GlsError::IndexOutOfRange { index: j, n });
                }
            }
        }
        Ok(Self { n, groups })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<Group> {
        self.groups
    }

    pub fn group_norms(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self.groups.iter().map(|g| g.residual_norm(x)).collect())
    }

    /// `sum_i ||x - s_i||_{L_i}`.
    pub fn obj(&self, x: &[f64]) -> Result<f64> {
        Ok(self.group_norms(x)?.into_iter().sum())
    }

    /// `sum_i (1 / w_i) ||x - s_i||_{L_i}^2`.
    pub fn obj2(&self, x: &[f64], w: &Weights) -> Result<f64> {
        check_len(self.n, x.len())?;
        check_len(self.k(), w.len())?;
        Ok(self
            .groups
            .iter()
            .zip(w.as_slice())
            .map(|(g, wi)| g.residual_sq(x) / wi)
            .sum())
    }

    /// `sum_i alpha_i L_i`.
    pub fn combined_matrix(&self, alpha: &[f64]) -> Result<SddMatrix> {
        check_len(self.k(), alpha.len())?;
        SddMatrix::weighted_sum(self.n, alpha.iter().copied().zip(self.groups.iter().map(|g| &g.l)))
    }

    /// Minimizes `obj2(., w)` by solving
    /// `(sum_i L_i / w_i) x = sum_i L_i s_i / w_i`.
    pub fn quad_min(&self, w: &Weights, tol: f64) -> Result<QuadMin> {
        self.quad_min_from(w, tol, None)
    }

    /// As [`Instance::quad_min`], warm-starting the iterative solve at `x0`.
    pub fn quad_min_from(&self, w: &Weights, tol: f64, x0: Option<&[f64]>) -> Result<QuadMin> {
        check_len(self.k(), w.len())?;
        let alpha: Vec<f64> = w.as_slice().iter().map(|wi| 1.0 / wi).collect();
        let a = self.combined_matrix(&alpha)?;
        let mut rhs = vec![0.0; self.n];
        for (g, &ai) in self.groups.iter().zip(&alpha) {
            g.l.accumulate_apply(|j| g.s.get(j), ai, &mut rhs);
        }
        let out = solve_sdd_from(&a, &rhs, x0, tol, default_max_iters(self.n))?;
        let opt2 = self.obj2(&out.x, w)?;
        Ok(QuadMin {
            x: out.x,
            opt2,
            relative_residual: out.relative_residual,
            cg_iterations: out.iterations,
        })
    }
}

/// Result of [`Instance::quad_min`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMin {
    pub x: Vec<f64>,
    /// `obj2` recomputed at the returned `x`.
    pub opt2: f64,
    pub relative_residual: f64,
    pub cg_iterations: usize,
}

/// Positive per-group weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_finite(&w, "weights")?;
        if let Some(&bad) = w.iter().find(|&&v| v <= 0.0) {
            return Err(GlsError::NonPositiveWeight(bad));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn edge01() -> SddMatrix {
        SddMatrix::assemble_laplacian(2, &[(0, 1, 1.0)], &[]).unwrap()
    }

    fn sv(vals: &[f64]) -> SparseVector {
        SparseVector::from_dense(vals).unwrap()
    }

    fn diag1(n: usize) -> SddMatrix {
        SddMatrix::identity(n)
    }

    #[test]
    fn obj_examples() {
        let inst = Instance::new(2, vec![Group::new(edge01(), sv(&[0.0, 1.0]))]).unwrap();
        assert_eq!(inst.obj(&[0.0, 1.0]).unwrap(), 0.0);
        let inst = Instance::new(2, vec![Group::centered(edge01())]).unwrap();
        assert_eq!(inst.obj(&[0.0, 1.0]).unwrap(), 1.0);
        let inst = Instance::new(
            2,
            vec![Group::new(diag1(2), sv(&[1.0, 1.0])), Group::centered(edge01())],
        )
        .unwrap();
        assert_eq!(inst.obj(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(inst.obj(&[1.0]).is_err());
    }

    #[test]
    fn obj2_unit_weights_and_homogeneity() {
        let inst = Instance::new(
            2,
            vec![Group::new(diag1(2), sv(&[1.0, 0.0])), Group::centered(edge01())],
        )
        .unwrap();
        let x = [0.3, -0.4];
        let plain: f64 = inst.groups().iter().map(|g| g.residual_sq(&x)).sum();
        assert!((inst.obj2(&x, &Weights::uniform(2)).unwrap() - plain).abs() < 1e-15);
        let w = Weights::new(vec![0.5, 2.0]).unwrap();
        let w3 = Weights::new(vec![1.5, 6.0]).unwrap();
        let a = inst.obj2(&x, &w).unwrap();
        let b = inst.obj2(&x, &w3).unwrap();
        assert!((b - a / 3.0).abs() < 1e-14);
    }

    #[test]
    fn weights_reject_nonpositive() {
        assert!(Weights::new(vec![1.0, 0.0]).is_err());
        assert!(Weights::new(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn quad_min_single_identity_group() {
        let s = [0.5, -1.0, 2.0];
        let inst = Instance::new(3, vec![Group::new(diag1(3), sv(&s))]).unwrap();
        let q = inst.quad_min(&Weights::uniform(1), 1e-12).unwrap();
        for (a, b) in q.x.iter().zip(&s) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(q.opt2 < 1e-18);
    }

    #[test]
    fn quad_min_two_points() {
        let inst = Instance::new(
            1,
            vec![Group::new(diag1(1), sv(&[0.0])), Group::new(diag1(1), sv(&[2.0]))],
        )
        .unwrap();
        let q = inst.quad_min(&Weights::uniform(2), 1e-12).unwrap();
        assert!((q.x[0] - 1.0).abs() < 1e-12);
        assert!((q.opt2 - 2.0).abs() < 1e-12);
        // minimize x^2 + (x - 2)^2 / 3: derivative 2x + 2(x - 2)/3 = 0 -> x = 0.5
        let q = inst.quad_min(&Weights::new(vec![1.0, 3.0]).unwrap(), 1e-12).unwrap();
        assert!((q.x[0] - 0.5).abs() < 1e-12);
        assert!((q.opt2 - 1.0).abs() < 1e-12);
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Instance {
        let groups = (0..k)
            .map(|_| {
                let mut edges = Vec::new();
                for _ in 0..rng.random_range(1..2 * n) {
                    let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
                    if u != v {
                        edges.push((u, v, rng.random_range(0.1..3.0)));
                    }
                }
                let diag: Vec<_> = if rng.random_bool(0.4) {
                    vec![(rng.random_range(0..n), rng.random_range(0.1..2.0))]
                } else {
                    vec![]
                };
                let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                Group::new(
                    SddMatrix::assemble_laplacian(n, &edges, &diag).unwrap(),
                    SparseVector::from_dense(&s).unwrap(),
                )
            })
            .collect();
        Instance::new(n, groups).unwrap()
    }

    #[test]
    fn quad_min_is_a_local_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(2..12);
            let k = rng.random_range(1..5);
            let inst = random_instance(&mut rng, n, k);
            let w = Weights::new((0..k).map(|_| rng.random_range(0.2..5.0)).collect()).unwrap();
            let q = inst.quad_min(&w, 1e-12).unwrap();
            for _ in 0..100 {
                let xp: Vec<f64> = q.x.iter().map(|v| v + rng.random_range(-1e-2..1e-2)).collect();
                assert!(inst.obj2(&xp, &w).unwrap() >= q.opt2 - 1e-10 * (1.0 + q.opt2));
            }
        }
    }

    #[test]
    fn cauchy_schwarz_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(2..10);
            let k = rng.random_range(1..6);
            let inst = random_instance(&mut rng, n, k);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = Weights::new((0..k).map(|_| rng.random_range(0.1..4.0)).collect()).unwrap();
            let o = inst.obj(&x).unwrap();
            let sq: f64 = inst.groups().iter().map(|g| g.residual_sq(&x)).sum();
            assert!(o * o <= k as f64 * sq * (1.0 + 1e-12) + 1e-12);
            assert!(o * o <= w.sum() * inst.obj2(&x, &w).unwrap() * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn opt2_does_not_increase_when_a_weight_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.random_range(2..10);
            let k = rng.random_range(2..5);
            let inst = random_instance(&mut rng, n, k);
            let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
            let before = inst.quad_min(&Weights::new(w.clone()).unwrap(), 1e-12).unwrap().opt2;
            let i = rng.random_range(0..k);
            w[i] *= 1.0 + rng.random_range(0.01..3.0);
            let after = inst.quad_min(&Weights::new(w).unwrap(), 1e-12).unwrap().opt2;
            assert!(after <= before * (1.0 + 1e-9) + 1e-12, "{after} > {before}");
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(Instance::new(2, vec![]).is_err());
        assert!(Instance::new(3, vec![Group::centered(edge01())]).is_err());
    }
}
