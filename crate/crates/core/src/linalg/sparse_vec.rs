use crate::error::{GlsError, Result};

/// Sorted sparse vector; absent coordinates are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from `(index, value)` pairs. Later duplicates overwrite earlier
    /// ones; zeros are dropped.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (i, v) in pairs {
            if i >= n {
                return Err(GlsError::IndexOutOfRange { index: i, n });
            }
            if !v.is_finite() {
                return Err(GlsError::NonFinite("fixed potential"));
            }
            entries.push((i, v));
        }
        // stable sort keeps insertion order among duplicates
        entries.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 = v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|&(_, v)| v != 0.0);
        Ok(Self { entries: out })
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.entries.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }
}
