//! Convex clustering:
//! `min_y sum_i ||x_i - y_i||_2^2 + lambda sum_{i<j} w_ij ||y_i - y_j||_2`.
//!
//! Each center `y_i` is `d` consecutive variables; every weighted pair
//! becomes one group of `d` coordinate-difference edges and the squared
//! fidelity goes through [`l22_fidelity_solve`].

use std::collections::BTreeMap;

use crate::error::{check_finite, check_len, GlsError, Result};
use crate::instance::{Group, Solution};
use crate::linalg::SddMatrix;
use crate::solver::SolverChoice;

use super::fidelity::l22_fidelity_solve;

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    /// Unordered pairs stored as `(i, j)` with `i < j`.
    weights: BTreeMap<(usize, usize), f64>,
}

impl PointSet {
    /// Builds a point set; `weights` lists `(i, j, w_ij)` with each unordered
    /// pair at most once in either orientation, unless both orientations
    /// agree.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<(usize, usize, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(GlsError::InvalidInstance("point set is empty".into()));
        }
        let d = points[0].len();
        for p in &points {
            check_len(d, p.len())?;
            check_finite(p, "point coordinates")?;
        }
        let n = points.len();
        let mut map = BTreeMap::new();
        for (i, j, w) in weights {
            for v in [i, j] {
                if v >= n {
                    return Err(GlsError::IndexOutOfRange { index: v, n });
                }
            }
            if i == j {
                return Err(GlsError::SelfLoop { u: i, v: j });
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(GlsError::InvalidArgument(format!("pair weight must be >= 0, got {w}")));
            }
            let key = (i.min(j), i.max(j));
            if let Some(&prev) = map.get(&key) {
                if prev != w {
                    return Err(GlsError::InvalidArgument(format!(
                        "asymmetric weight for pair ({i}, {j}): {prev} and {w}"
                    )));
                }
            }
            map.insert(key, w);
        }
        Ok(Self { points, weights: map })
    }

    /// Every pair with weight 1.
    pub fn with_unit_weights(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        let pairs = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)))
            .collect();
        Self::new(points, pairs)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringEncoding {
    /// Smoothness groups over the `n * d` center coordinates.
    pub smooth: Vec<Group>,
    /// Flattened data points, the fidelity target.
    pub target: Vec<f64>,
    n: usize,
    d: usize,
}

impl ClusteringEncoding {
    /// Reshapes a flat solution into `n` centers.
    pub fn decode(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len(self.n * self.d, x.len())?;
        Ok(x.chunks(self.d).map(<[f64]>::to_vec).collect())
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        super::fidelity::l22_objective(&self.smooth, &self.target, x)
    }
}

pub fn clustering_instance(ps: &PointSet, lambda: f64) -> Result<ClusteringEncoding> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(GlsError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let (n, d) = (ps.len(), ps.dim());
    let mut smooth = Vec::new();
    if lambda > 0.0 {
        for (i, j, w) in ps.weights() {
            if w == 0.0 {
                continue;
            }
            let c = (lambda * w).powi(2);
            let edges: Vec<_> = (0..d).map(|a| (i * d + a, j * d + a, c)).collect();
            smooth.push(Group::centered(SddMatrix::assemble_laplacian(n * d, &edges, &[])?));
        }
    }
    Ok(ClusteringEncoding {
        smooth,
        target: ps.points().iter().flatten().copied().collect(),
        n,
        d,
    })
}

/// Solves the clustering objective; returns the centers and the solution
/// over the flattened coordinates.
pub fn solve_clustering(
    ps: &PointSet,
    lambda: f64,
    solver: &SolverChoice,
    search_tol: f64,
) -> Result<(Vec<Vec<f64>>, Solution)> {
    let enc = clustering_instance(ps, lambda)?;
    let sol = l22_fidelity_solve(&enc.smooth, &enc.target, solver, search_tol)?;
    Ok((enc.decode(&sol.x)?, sol))
}

/// Parses a points file:
///
/// ```text
/// points <n> <d>
/// <x_1> ... <x_d>        # n coordinate lines
/// w <i> <j> <value>      # optional pair weights
/// ```
///
/// Without any `w` line every pair gets weight 1.
pub fn parse_points(text: &str) -> Result<PointSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| GlsError::Parse { line, msg };
    let (line, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header `points <n> <d>`".into()))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 3 || tok[0] != "points" {
        return Err(err(line, "expected header `points <n> <d>`".into()));
    }
    let n: usize = tok[1].parse().map_err(|_| err(line, "invalid point count".into()))?;
    let d: usize = tok[2].parse().map_err(|_| err(line, "invalid dimension".into()))?;
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::new();
    let mut last = line;
    for (line, content) in lines {
        last = line;
        let tok: Vec<&str> = content.split_whitespace().collect();
        if tok[0] == "w" {
            if tok.len() != 4 {
                return Err(err(line, "expected `w <i> <j> <value>`".into()));
            }
            let i: usize = tok[1].parse().map_err(|_| err(line, "invalid index".into()))?;
            let j: usize = tok[2].parse().map_err(|_| err(line, "invalid index".into()))?;
            let w: f64 = tok[3].parse().map_err(|_| err(line, "invalid weight".into()))?;
            weights.push((i, j, w));
        } else {
            if points.len() == n {
                return Err(err(line, "more points than declared".into()));
            }
            if tok.len() != d {
                return Err(err(line, format!("expected {d} coordinates, got {}", tok.len())));
            }
            let p = tok
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| err(line, format!("invalid coordinate `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
    }
    if points.len() != n {
        return Err(err(last, format!("expected {n} points, found {}", points.len())));
    }
    let wrap = |e: GlsError| err(last, e.to_string());
    if weights.is_empty() {
        PointSet::with_unit_weights(points).map_err(wrap)
    } else {
        PointSet::new(points, weights).map_err(wrap)
    }
}
