use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, GlsError, Result};

/// Row-major dense matrix used for the small inner systems and for test
/// cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Solves `A x = b` by partial-pivoting LU with one refinement step.
///
/// Fails with [`GlsError::Singular`] when the pivots span more than 14
/// orders of magnitude.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows != a.cols {
        return Err(GlsError::InvalidArgument(format!(
            "dense_solve needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    check_len(a.rows, b.len())?;
    crate::error::check_finite(&a.data, "dense matrix")?;
    crate::error::check_finite(b, "right-hand side")?;
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = a.to_nalgebra();
    let lu = m.clone().lu();
    let u = lu.u();
    let pivots = (0..n).map(|i| u[(i, i)].abs());
    let (lo, hi) = pivots.fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
    if hi == 0.0 || lo <= 1e-14 * hi {
        return Err(GlsError::Singular);
    }
    let rhs = DVector::from_column_slice(b);
    let mut x = lu.solve(&rhs).ok_or(GlsError::Singular)?;
    let r = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let x = dense_solve(&DenseMatrix::identity(3), &[1.0, -2.0, 3.5]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn diagonal_system() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(dense_solve(&a, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut a = DenseMatrix::zeros(5, 5);
            for i in 0..5 {
                for j in 0..5 {
                    a.set(i, j, rng.random_range(-1.0..1.0));
                }
                a.add(i, i, 5.0);
            }
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = dense_solve(&a, &b).unwrap();
            let r: f64 = a
                .matvec(&x)
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= 1e-10 * nb, "residual {r}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(dense_solve(&a, &[1.0, 2.0]), Err(GlsError::Singular));
    }
}
