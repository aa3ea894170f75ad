//! s-t minimum cut as a fused-lasso instance over vertex labels.
//!
//! Labels live on `V \ {s, t}` with `s` fixed at 0 and `t` at 1. An edge
//! between free vertices contributes `c |x_u - x_v|`, an edge to `s`
//! contributes `c |x_u|` and an edge to `t` contributes `c |x_u - 1|`.
//! Direct s-t edges are a constant offset.

use crate::error::{check_len, GlsError, Result};
use crate::instance::{Group, Instance};
use crate::linalg::{SddMatrix, SparseVector};

use super::WeightedGraph;

#[derive(Debug, Clone)]
pub struct MinCutEncoding {
    /// `None` when no group involves a free vertex (every edge joins `s`
    /// and `t`, or there are no edges).
    pub instance: Option<Instance>,
    /// Sum of capacities of direct s-t edges.
    pub offset: f64,
    /// Graph vertex of each variable.
    pub vertices: Vec<usize>,
    graph: WeightedGraph,
    s: usize,
    t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub value: f64,
    /// `true` for vertices on the source side.
    pub source_side: Vec<bool>,
}

impl MinCutEncoding {
    pub fn num_variables(&self) -> usize {
        self.vertices.len()
    }

    /// Source and sink vertices.
    pub fn terminals(&self) -> (usize, usize) {
        (self.s, self.t)
    }

    /// Value of the cut separating `{v : source_side[v]}` from the rest.
    pub fn cut_value(&self, source_side: &[bool]) -> f64 {
        self.graph
            .edges()
            .iter()
            .filter(|&&(u, v, _)| source_side[u] != source_side[v])
            .map(|e| e.2)
            .sum()
    }

    /// Instance objective plus the s-t offset; equals the cut value at any
    /// 0/1 labelling.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        check_len(self.num_variables(), x.len())?;
        Ok(match &self.instance {
            Some(inst) => inst.obj(x)? + self.offset,
            None => self.offset,
        })
    }

    /// Sweeps every threshold between consecutive distinct labels (after
    /// clamping to `[0, 1]`) and returns the smallest induced cut. Vertices
    /// with label above the threshold go to the sink side.
    pub fn decode(&self, x: &[f64]) -> Result<Cut> {
        check_len(self.num_variables(), x.len())?;
        let n = self.graph.n();
        let mut label = vec![0.0; n];
        label[self.t] = 1.0;
        for (&v, &xv) in self.vertices.iter().zip(x) {
            label[v] = if xv.is_nan() { 0.0 } else { xv.clamp(0.0, 1.0) };
        }
        let mut levels = label.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut best: Option<Cut> = None;
        for pair in levels.windows(2) {
            let theta = 0.5 * (pair[0] + pair[1]);
            let source_side: Vec<bool> = label.iter().map(|&l| l <= theta).collect();
            let value = self.cut_value(&source_side);
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Cut { value, source_side });
            }
        }
        Ok(best.expect("labels 0 and 1 are always present"))
    }
}

pub fn mincut_instance(g: &WeightedGraph, s: usize, t: usize) -> Result<MinCutEncoding> {
    g.check_vertex(s)?;
    g.check_vertex(t)?;
    if s == t {
        return Err(GlsError::InvalidArgument("source and target must differ".into()));
    }
    let mut var_of = vec![None; g.n()];
    let mut vertices = Vec::new();
    for v in (0..g.n()).filter(|&v| v != s && v != t) {
        var_of[v] = Some(vertices.len());
        vertices.push(v);
    }
    let nv = vertices.len();
    let mut groups = Vec::new();
    let mut offset = 0.0;
    for &(u, v, c) in g.edges() {
        let c2 = c * c;
        match (var_of[u], var_of[v]) {
            (Some(a), Some(b)) => {
                groups.push(Group::centered(SddMatrix::assemble_laplacian(nv, &[(a, b, c2)], &[])?));
            }
            (Some(a), None) | (None, Some(a)) => {
                let other = if var_of[u].is_some() { v } else { u };
                let diag = SddMatrix::assemble_laplacian(nv, &[], &[(a, c2)])?;
                let target = if other == t { 1.0 } else { 0.0 };
                groups.push(Group::new(diag, SparseVector::from_pairs(nv, vec![(a, target)])?));
            }
            (None, None) => offset += c,
        }
    }
    let instance = if groups.is_empty() {
        None
    } else {
        Some(Instance::new(nv, groups)?)
    };
    Ok(MinCutEncoding {
        instance,
        offset,
        vertices,
        graph: g.clone(),
        s,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipm::{solve_ipm, IpmConfig};

    #[test]
    fn single_st_edge() {
        let g = WeightedGraph::new(2, vec![(0, 1, 5.0)]).unwrap();
        let enc = mincut_instance(&g, 0, 1).unwrap();
        assert!(enc.instance.is_none());
        assert_eq!(enc.num_variables(), 0);
        let cut = enc.decode(&[]).unwrap();
        assert_eq!(cut.value, 5.0);
        assert_eq!(cut.source_side, vec![true, false]);
    }

    #[test]
    fn path_cuts_the_light_edge() {
        // s = 0, a = 1, t = 2
        let g = WeightedGraph::new(3, vec![(0, 1, 2.0), (1, 2, 7.0)]).unwrap();
        let enc = mincut_instance(&g, 0, 2).unwrap();
        let sol = solve_ipm(enc.instance.as_ref().unwrap(), &IpmConfig::with_eps(1e-6)).unwrap();
        let cut = enc.decode(&sol.x).unwrap();
        assert_eq!(cut.value, 2.0);
        assert!(!cut.source_side[1]);
    }

    #[test]
    fn labellings_evaluate_to_cut_values() {
        let g = WeightedGraph::new(
            5,
            vec![(0, 1, 3.0), (1, 2, 1.0), (2, 4, 2.0), (0, 3, 4.0), (3, 4, 5.0), (1, 3, 2.0), (0, 4, 1.0)],
        )
        .unwrap();
        let enc = mincut_instance(&g, 0, 4).unwrap();
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|b| ((mask >> b) & 1) as f64).collect();
            let mut side = vec![true; 5];
            side[4] = false;
            for (&v, &xv) in enc.vertices.iter().zip(&x) {
                side[v] = xv == 0.0;
            }
            assert_eq!(enc.objective(&x).unwrap(), enc.cut_value(&side));
        }
    }

    #[test]
    fn decode_never_exceeds_objective() {
        let g = WeightedGraph::new(4, vec![(0, 1, 3.0), (1, 2, 1.0), (2, 3, 2.0), (0, 2, 4.0)]).unwrap();
        let enc = mincut_instance(&g, 0, 3).unwrap();
        for x in [[0.3, 0.7], [1.4, -0.2], [0.5, 0.5]] {
            let cut = enc.decode(&x).unwrap();
            let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            assert!(cut.value <= enc.objective(&clamped).unwrap() + 1e-12);
            assert_eq!(cut.value, enc.cut_value(&cut.source_side));
        }
    }
}
