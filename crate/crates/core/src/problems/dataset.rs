use std::ops::Range;

use crate::error::{Error, Result};

/// Row-compressed sparse samples with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Appends a sample. Indices must be strictly increasing and below
    /// `n_features`; the label is mapped to `+1` if positive, else `−1`.
    pub fn push(&mut self, label: f64, entries: &[(usize, f64)]) -> Result<()> {
        let mut prev = None;
        for &(j, _) in entries {
            if j >= self.n_features {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    n: self.n_features,
                });
            }
            if prev.is_some_and(|p| j <= p) {
                return Err(Error::Config(format!("feature indices not increasing at {j}")));
            }
            prev = Some(j);
        }
        self.indices.extend(entries.iter().map(|e| e.0));
        self.values.extend(entries.iter().map(|e| e.1));
        self.indptr.push(self.indices.len());
        self.labels.push(if label > 0.0 { 1.0 } else { -1.0 });
        Ok(())
    }

    pub(crate) fn from_parts(
        n_features: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<f64>,
    ) -> Self {
        Self {
            n_features,
            indptr,
            indices,
            values,
            labels,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    /// Widens the feature space (e.g. when a shard saw fewer features than
    /// the full file).
    pub fn with_n_features(mut self, n_features: usize) -> Result<Self> {
        if let Some(&m) = self.indices.iter().max() {
            if m >= n_features {
                return Err(Error::IndexOutOfRange {
                    index: m,
                    n: n_features,
                });
            }
        }
        self.n_features = n_features;
        Ok(self)
    }

    /// Copy of the samples in `range`, keeping the feature space.
    pub fn slice(&self, range: Range<usize>) -> Self {
        let mut out = Self::new(self.n_features);
        for i in range {
            let (idx, val) = self.row(i);
            out.indices.extend_from_slice(idx);
            out.values.extend_from_slice(val);
            out.indptr.push(out.indices.len());
            out.labels.push(self.labels[i]);
        }
        out
    }

    /// Sorted union of the features touched by `rows`.
    pub fn support(&self, rows: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut seen = vec![false; self.n_features];
        for i in rows {
            for &j in self.row(i).0 {
                seen[j] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(j, &s)| s.then_some(j))
            .collect()
    }
}
