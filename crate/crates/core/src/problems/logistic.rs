//! Logistic loss `Σ_i log(1 + exp(−b_i⟨a_i, x⟩))` over a sparse dataset.
//! Regularization is left to the prox.

use std::sync::Arc;

use super::dataset::SparseDataset;
use crate::error::{check_dim, Error, Result};
use crate::loss::Loss;

/// `log(1 + e^m)` without overflow.
#[inline]
pub fn log1pexp(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// `1 / (1 + e^{−m})` without overflow.
#[inline]
pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct LogisticLoss {
    data: Arc<SparseDataset>,
}

impl LogisticLoss {
    pub fn new(data: impl Into<Arc<SparseDataset>>) -> Self {
        Self { data: data.into() }
    }

    pub fn dataset(&self) -> &SparseDataset {
        &self.data
    }

    /// Smoothness surrogate `0.25 × count` for `count` unit-norm samples.
    pub fn lipschitz_bound(count: usize) -> f64 {
        0.25 * count as f64
    }

    #[inline]
    fn accumulate(&self, i: usize, x: &[f64], g: &mut [f64]) -> f64 {
        let (idx, val) = self.data.row(i);
        let b = self.data.label(i);
        let z: f64 = idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum();
        let m = -b * z;
        let coef = -b * sigmoid(m);
        for (&j, &v) in idx.iter().zip(val) {
            g[j] += coef * v;
        }
        log1pexp(m)
    }

    /// Loss and gradient over the samples in `indices`.
    pub fn incremental(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64> {
        let d = self.data.n_features();
        check_dim(d, x.len())?;
        check_dim(d, g.len())?;
        let n = self.data.n_samples();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        Ok(indices.iter().map(|&i| self.accumulate(i, x, g)).sum())
    }

    /// Loss value only.
    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.data.n_samples())
            .map(|i| {
                let (idx, val) = self.data.row(i);
                let z: f64 = idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum();
                log1pexp(-self.data.label(i) * z)
            })
            .sum()
    }
}

impl Loss for LogisticLoss {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn n_components(&self) -> usize {
        self.data.n_samples()
    }

    fn full(&self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        let d = self.data.n_features();
        check_dim(d, x.len())?;
        check_dim(d, g.len())?;
        g.iter_mut().for_each(|v| *v = 0.0);
        Ok((0..self.data.n_samples()).map(|i| self.accumulate(i, x, g)).sum())
    }

    fn partial(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64> {
        self.incremental(x, g, indices)
    }
}
