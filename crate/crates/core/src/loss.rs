//! Smooth finite-sum loss abstraction.
//!
//! A loss `F(x) = Σ_n f_n(x)` evaluates its value and writes the gradient
//! into a caller-supplied buffer. Evaluation never mutates `x` and must be
//! callable from several threads at once, each with its own `g` buffer.

use crate::error::Result;

pub trait Loss: Sync {
    /// Dimension of the decision vector.
    fn dim(&self) -> usize;

    /// Number of smooth components `N`.
    fn n_components(&self) -> usize;

    /// Returns `F(x)` and overwrites `g` with `∇F(x)`.
    fn full(&self, x: &[f64], g: &mut [f64]) -> Result<f64>;

    /// Returns `Σ_{n∈I} f_n(x)` and overwrites `g` with `Σ_{n∈I} ∇f_n(x)`.
    fn partial(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64>;
}

impl<L: Loss + ?Sized> Loss for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn n_components(&self) -> usize {
        (**self).n_components()
    }

    fn full(&self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        (**self).full(x, g)
    }

    fn partial(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64> {
        (**self).partial(x, g, indices)
    }
}

/// Adapts a closure `(x, g) -> F(x)` into a single-component [`Loss`].
pub struct FnLoss<F> {
    dim: usize,
    f: F,
}

impl<F> FnLoss<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Loss for FnLoss<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_components(&self) -> usize {
        1
    }

    fn full(&self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        Ok((self.f)(x, g))
    }

    fn partial(&self, x: &[f64], g: &mut [f64], indices: &[usize]) -> Result<f64> {
        if let Some(&bad) = indices.iter().find(|&&i| i != 0) {
            return Err(crate::Error::IndexOutOfRange { index: bad, n: 1 });
        }
        if indices.is_empty() {
            g.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0.0);
        }
        let f = (self.f)(x, g);
        let m = indices.len() as f64;
        if m != 1.0 {
            g.iter_mut().for_each(|v| *v *= m);
        }
        Ok(f * m)
    }
}
