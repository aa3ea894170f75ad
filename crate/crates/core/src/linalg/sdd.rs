use std::collections::BTreeMap;

use crate::error::{GlsError, Result};
use crate::linalg::dense::DenseMatrix;

/// A Laplacian edge `w (x_u - x_v)^2`, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// A weighted squared linear form `weight * (sum_j c_j x_j)^2`.
///
/// Flow-conservation encodings need terms like `||B^T f||^2` whose matrix
/// is not diagonally dominant; these rows carry them.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredForm {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
}

impl SquaredForm {
    pub fn new(weight: f64, coeffs: Vec<(usize, f64)>) -> Self {
        Self { weight, coeffs }
    }

    fn dot(&self, val: impl Fn(usize) -> f64) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * val(j)).sum()
    }
}

/// One weighted row of the factored form `M = sum_r w_r a_r a_r^T`.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Edge(Edge),
    Diag(usize, f64),
    Form(&'a SquaredForm),
}

impl Row<'_> {
    pub fn weight(&self) -> f64 {
        match *self {
            Row::Edge(e) => e.w,
            Row::Diag(_, d) => d,
            Row::Form(f) => f.weight,
        }
    }

    /// `a_r . z` where `z_j = val(j)`.
    pub fn dot(&self, val: impl Fn(usize) -> f64) -> f64 {
        match *self {
            Row::Edge(e) => val(e.u) - val(e.v),
            Row::Diag(u, _) => val(u),
            Row::Form(f) => f.dot(val),
        }
    }

    /// Calls `f(j, a_rj)` for every nonzero coefficient of the row.
    pub fn for_each_coeff(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Row::Edge(e) => {
                f(e.u, 1.0);
                f(e.v, -1.0);
            }
            Row::Diag(u, _) => f(u, 1.0),
            Row::Form(form) => form.coeffs.iter().for_each(|&(j, c)| f(j, c)),
        }
    }
}

/// Sparse symmetric PSD matrix: weighted graph Laplacian plus a nonnegative
/// diagonal, optionally plus squared linear forms.
///
/// Without forms the assembled matrix is SDD with nonpositive off-diagonals.
/// The quadratic form is
/// `sum_edges w (x_u - x_v)^2 + sum_diag d x_u^2 + sum_forms w (a . x)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SddMatrix {
    n: usize,
    edges: Vec<Edge>,
    diag: Vec<(usize, f64)>,
    forms: Vec<SquaredForm>,
}

impl SddMatrix {
    /// Validates and assembles a Laplacian-plus-diagonal matrix.
    ///
    /// Duplicate edges are merged by adding weights, as are repeated diagonal
    /// entries. Zero diagonal entries are dropped.
    pub fn assemble_laplacian(
        n: usize,
        edges: &[(usize, usize, f64)],
        diag: &[(usize, f64)],
    ) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in edges {
            check_index(u, n)?;
            check_index(v, n)?;
            if u == v {
                return Err(GlsError::SelfLoop { u, v });
            }
            if !w.is_finite() {
                return Err(GlsError::NonFinite("edge weight"));
            }
            if w <= 0.0 {
                return Err(GlsError::NonPositiveWeight(w));
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        let mut dmerged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(u, d) in diag {
            check_index(u, n)?;
            if !d.is_finite() {
                return Err(GlsError::NonFinite("diagonal entry"));
            }
            if d < 0.0 {
                return Err(GlsError::NegativeDiagonal(d));
            }
            *dmerged.entry(u).or_insert(0.0) += d;
        }
        Ok(Self {
            n,
            edges: merged
                .into_iter()
                .map(|((u, v), w)| Edge { u, v, w })
                .collect(),
            diag: dmerged.into_iter().filter(|&(_, d)| d > 0.0).collect(),
            forms: Vec::new(),
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            diag: Vec::new(),
            forms: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, d: f64) -> Self {
        Self {
            n,
            edges: Vec::new(),
            diag: if d > 0.0 { (0..n).map(|u| (u, d)).collect() } else { Vec::new() },
            forms: Vec::new(),
        }
    }

    /// Adds squared linear forms. Coefficients on the same index are summed.
    pub fn with_forms(mut self, forms: Vec<SquaredForm>) -> Result<Self> {
        for f in forms {
            if !f.weight.is_finite() {
                return Err(GlsError::NonFinite("form weight"));
            }
            if f.weight <= 0.0 {
                return Err(GlsError::NonPositiveWeight(f.weight));
            }
            let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, c) in &f.coeffs {
                check_index(j, self.n)?;
                if !c.is_finite() {
                    return Err(GlsError::NonFinite("form coefficient"));
                }
                *coeffs.entry(j).or_insert(0.0) += c;
            }
            let coeffs: Vec<_> = coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect();
            if !coeffs.is_empty() {
                self.forms.push(SquaredForm::new(f.weight, coeffs));
            }
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn diag(&self) -> &[(usize, f64)] {
        &self.diag
    }

    pub fn forms(&self) -> &[SquaredForm] {
        &self.forms
    }

    /// True when the matrix has no squared forms, i.e. is a Laplacian plus
    /// a nonnegative diagonal.
    pub fn is_sdd(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.edges.is_empty() && self.diag.is_empty() && self.forms.is_empty()
    }

    pub fn nnz_rows(&self) -> usize {
        self.edges.len() + self.diag.len() + self.forms.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        self.edges
            .iter()
            .map(|&e| Row::Edge(e))
            .chain(self.diag.iter().map(|&(u, d)| Row::Diag(u, d)))
            .chain(self.forms.iter().map(Row::Form))
    }

    /// Sorted list of vertices touched by any row.
    pub fn support(&self) -> Vec<usize> {
        let mut s = Vec::new();
        for r in self.rows() {
            r.for_each_coeff(|j, _| s.push(j));
        }
        s.sort_unstable();
        s.dedup();
        s
    }

    /// `M x`, computed from the row form.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        self.accumulate_apply(|j| x[j], 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale * M z` where `z_j = val(j)`; only the support is read.
    pub fn accumulate_apply(&self, val: impl Fn(usize) -> f64, scale: f64, out: &mut [f64]) {
        for e in &self.edges {
            let t = scale * e.w * (val(e.u) - val(e.v));
            out[e.u] += t;
            out[e.v] -= t;
        }
        for &(u, d) in &self.diag {
            out[u] += scale * d * val(u);
        }
        for f in &self.forms {
            let t = scale * f.weight * f.dot(&val);
            for &(j, c) in &f.coeffs {
                out[j] += t * c;
            }
        }
    }

    /// `z^T M z` where `z_j = val(j)`; only the support is read.
    pub fn quad_form_with(&self, val: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for e in &self.edges {
            let d = val(e.u) - val(e.v);
            acc += e.w * d * d;
        }
        for &(u, d) in &self.diag {
            let z = val(u);
            acc += d * z * z;
        }
        for f in &self.forms {
            let t = f.dot(&val);
            acc += f.weight * t * t;
        }
        acc
    }

    pub fn quad_form(&self, z: &[f64]) -> Result<f64> {
        crate::error::check_len(self.n, z.len())?;
        Ok(self.quad_form_with(|j| z[j]))
    }

    /// `||z||_M = sqrt(z^T M z)`, clamped at zero.
    pub fn quad_norm(&self, z: &[f64]) -> Result<f64> {
        Ok(self.quad_form(z)?.max(0.0).sqrt())
    }

    /// `out += scale * diag(M)`.
    pub fn accumulate_diagonal(&self, scale: f64, out: &mut [f64]) {
        for e in &self.edges {
            out[e.u] += scale * e.w;
            out[e.v] += scale * e.w;
        }
        for &(u, d) in &self.diag {
            out[u] += scale * d;
        }
        for f in &self.forms {
            for &(j, c) in &f.coeffs {
                out[j] += scale * f.weight * c * c;
            }
        }
    }

    /// Gershgorin-style upper bound on the largest eigenvalue.
    pub fn spectral_upper_bound(&self) -> f64 {
        // max absolute row sum of M
        let mut abs_row = vec![0.0; self.n];
        for e in &self.edges {
            abs_row[e.u] += 2.0 * e.w;
            abs_row[e.v] += 2.0 * e.w;
        }
        for &(u, d) in &self.diag {
            abs_row[u] += d;
        }
        for f in &self.forms {
            let l1: f64 = f.coeffs.iter().map(|&(_, c)| c.abs()).sum();
            for &(j, c) in &f.coeffs {
                abs_row[j] += f.weight * c.abs() * l1;
            }
        }
        abs_row.into_iter().fold(0.0, f64::max)
    }

    /// `sum_i scale_i * M_i`, merging duplicate edges and diagonal entries.
    pub fn weighted_sum<'a>(
        n: usize,
        parts: impl IntoIterator<Item = (f64, &'a SddMatrix)>,
    ) -> Result<SddMatrix> {
        let mut edges: Vec<Edge> = Vec::new();
        let mut diag: Vec<(usize, f64)> = Vec::new();
        let mut forms: Vec<SquaredForm> = Vec::new();
        for (scale, m) in parts {
            crate::error::check_len(n, m.n)?;
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(GlsError::InvalidArgument(format!(
                    "combination coefficient must be finite and nonnegative, got {scale}"
                )));
            }
            if scale == 0.0 {
                continue;
            }
            edges.extend(m.edges.iter().map(|e| Edge { w: scale * e.w, ..*e }));
            diag.extend(m.diag.iter().map(|&(u, d)| (u, scale * d)));
            forms.extend(
                m.forms
                    .iter()
                    .map(|f| SquaredForm::new(scale * f.weight, f.coeffs.clone())),
            );
        }
        edges.sort_unstable_by_key(|e| (e.u, e.v));
        let mut merged: Vec<Edge> = Vec::with_capacity(edges.len());
        for e in edges {
            match merged.last_mut() {
                Some(last) if last.u == e.u && last.v == e.v => last.w += e.w,
                _ => merged.push(e),
            }
        }
        diag.sort_unstable_by_key(|&(u, _)| u);
        let mut dmerged: Vec<(usize, f64)> = Vec::with_capacity(diag.len());
        for (u, d) in diag {
            match dmerged.last_mut() {
                Some(last) if last.0 == u => last.1 += d,
                _ => dmerged.push((u, d)),
            }
        }
        Ok(SddMatrix {
            n,
            edges: merged,
            diag: dmerged,
            forms,
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for r in self.rows() {
            let w = r.weight();
            let mut coeffs = Vec::new();
            r.for_each_coeff(|j, c| coeffs.push((j, c)));
            for &(i, ci) in &coeffs {
                for &(j, cj) in &coeffs {
                    m.add(i, j, w * ci * cj);
                }
            }
        }
        m
    }

    /// Connected components of the coupling graph, with a flag telling
    /// whether the component's constant vector is outside the null space.
    pub fn components(&self) -> Components {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        for f in &self.forms {
            if let Some(&(first, _)) = f.coeffs.first() {
                for &(j, _) in &f.coeffs[1..] {
                    uf.union(first, j);
                }
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        for v in 0..self.n {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            label[v] = label[r];
        }
        let mut grounded = vec![false; count];
        for &(u, _) in &self.diag {
            grounded[label[u]] = true;
        }
        for f in &self.forms {
            if let Some(&(first, _)) = f.coeffs.first() {
                let sum: f64 = f.coeffs.iter().map(|&(_, c)| c).sum();
                let scale: f64 = f.coeffs.iter().map(|&(_, c)| c.abs()).sum();
                if sum.abs() > 1e-12 * scale {
                    grounded[label[first]] = true;
                }
            }
        }
        Components {
            label,
            grounded,
        }
    }
}

/// Component labelling produced by [`SddMatrix::components`].
#[derive(Debug, Clone)]
pub struct Components {
    pub label: Vec<usize>,
    pub grounded: Vec<bool>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.grounded.len()
    }

    /// Member lists of the components whose constant vector lies in the
    /// null space.
    pub fn floating_members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.count()];
        for (v, &c) in self.label.iter().enumerate() {
            if !self.grounded[c] {
                members[c].push(v);
            }
        }
        members.retain(|m| !m.is_empty());
        members
    }
}

fn check_index(u: usize, n: usize) -> Result<()> {
    if u < n {
        Ok(())
    } else {
        Err(GlsError::IndexOutOfRange { index: u, n })
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
