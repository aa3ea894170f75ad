//! s-t shortest path as a grouped least squares problem over edge flows.
//!
//! Variables are flows `f_e`. One group measures the conservation defect
//! `penalty * ||B^T (f - f')||_2` against a fixed s-t path flow `f'`; one
//! single-variable group per edge contributes `l_e |f_e|`. A large enough
//! penalty makes the conservation term exact, so the minimum is the
//! shortest-path length.

use crate::error::{check_len, GlsError, Result};
use crate::instance::{Group, Instance};
use crate::linalg::{SddMatrix, SparseVector, SquaredForm};

use super::WeightedGraph;

#[derive(Debug, Clone)]
pub struct ShortestPathEncoding {
    pub instance: Instance,
    lengths: Vec<f64>,
}

impl ShortestPathEncoding {
    /// `sum_e l_e |f_e|` at the flow `x`.
    pub fn decode(&self, x: &[f64]) -> Result<f64> {
        check_len(self.lengths.len(), x.len())?;
        Ok(self.lengths.iter().zip(x).map(|(l, f)| l * f.abs()).sum())
    }
}

/// `4 n max_len sqrt(m)`.
pub fn default_penalty(g: &WeightedGraph) -> f64 {
    4.0 * g.n() as f64 * g.max_value() * (g.m() as f64).sqrt()
}

pub fn shortest_path_instance(
    g: &WeightedGraph,
    s: usize,
    t: usize,
    penalty: f64,
) -> Result<ShortestPathEncoding> {
    g.check_vertex(s)?;
    g.check_vertex(t)?;
    if s == t {
        return Err(GlsError::InvalidArgument("source and target must differ".into()));
    }
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(GlsError::InvalidArgument(format!("penalty must be positive, got {penalty}")));
    }
    let path = g
        .bfs_path(s, t)
        .ok_or_else(|| GlsError::InvalidInstance(format!("vertices {s} and {t} are not connected")))?;
    let m = g.m();

    let mut incident = vec![Vec::new(); g.n()];
    for (idx, &(u, v, _)) in g.edges().iter().enumerate() {
        incident[u].push((idx, 1.0));
        incident[v].push((idx, -1.0));
    }
    let forms = incident
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|c| SquaredForm::new(penalty * penalty, c))
        .collect();
    let conservation = SddMatrix::zero(m).with_forms(forms)?;
    let reference = SparseVector::from_pairs(m, path)?;

    let mut groups = vec![Group::new(conservation, reference)];
    for (idx, &(_, _, len)) in g.edges().iter().enumerate() {
        groups.push(Group::centered(SddMatrix::assemble_laplacian(m, &[], &[(idx, len * len)])?));
    }
    Ok(ShortestPathEncoding {
        instance: Instance::new(m, groups)?,
        lengths: g.edges().iter().map(|e| e.2).collect(),
    })
}
