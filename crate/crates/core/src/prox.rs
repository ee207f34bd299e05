//! Proximal operators. `apply` computes `prox_{γh}(x − γ·d)`.

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    None,
    L1,
    Custom,
}

pub trait Prox: Send + Sync {
    /// Writes `prox_{γh}(x − γ·d)` into `out`.
    fn apply(&self, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()>;

    /// Coordinate-wise form, available only when `h` is separable.
    fn as_separable(&self) -> Option<&dyn SeparableProx> {
        None
    }

    fn kind(&self) -> ProxKind {
        ProxKind::Custom
    }
}

/// A prox that acts on each coordinate independently.
pub trait SeparableProx: Sync {
    fn coordinate(&self, gamma: f64, x: f64, d: f64) -> f64;

    /// True when a zero direction leaves the coordinate untouched, so lock-free
    /// executors may skip it.
    fn fixes_zero_direction(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxConfig {
    None,
    L1 { lambda1: f64 },
}

impl ProxConfig {
    pub fn build(&self) -> Box<dyn Prox> {
        match *self {
            ProxConfig::None => Box::new(NoProx),
            ProxConfig::L1 { lambda1 } => Box::new(L1Norm::new(lambda1)),
        }
    }

    pub fn kind(&self) -> ProxKind {
        match self {
            ProxConfig::None => ProxKind::None,
            ProxConfig::L1 { .. } => ProxKind::L1,
        }
    }

    /// Value of the regularizer `h(x)`.
    pub fn regularizer(&self, x: &[f64]) -> f64 {
        match *self {
            ProxConfig::None => 0.0,
            ProxConfig::L1 { lambda1 } => lambda1 * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }
}

fn apply_separable(p: &dyn SeparableProx, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
    check_dim(x.len(), d.len())?;
    check_dim(x.len(), out.len())?;
    for ((o, &xi), &di) in out.iter_mut().zip(x).zip(d) {
        *o = p.coordinate(gamma, xi, di);
    }
    Ok(())
}

/// Identity prox: a plain gradient step.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoProx;

impl SeparableProx for NoProx {
    #[inline]
    fn coordinate(&self, gamma: f64, x: f64, d: f64) -> f64 {
        x - gamma * d
    }

    fn fixes_zero_direction(&self) -> bool {
        true
    }
}

impl Prox for NoProx {
    fn apply(&self, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        apply_separable(self, gamma, x, d, out)
    }

    fn as_separable(&self) -> Option<&dyn SeparableProx> {
        Some(self)
    }

    fn kind(&self) -> ProxKind {
        ProxKind::None
    }
}

/// Soft-thresholding, the prox of `λ₁‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub lambda1: f64,
}

impl L1Norm {
    pub fn new(lambda1: f64) -> Self {
        assert!(lambda1 >= 0.0, "lambda1 must be nonnegative");
        Self { lambda1 }
    }
}

#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

impl SeparableProx for L1Norm {
    #[inline]
    fn coordinate(&self, gamma: f64, x: f64, d: f64) -> f64 {
        let v = x - gamma * d;
        if self.lambda1 == 0.0 {
            v
        } else {
            soft_threshold(v, gamma * self.lambda1)
        }
    }

    fn fixes_zero_direction(&self) -> bool {
        self.lambda1 == 0.0
    }
}

impl Prox for L1Norm {
    fn apply(&self, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        apply_separable(self, gamma, x, d, out)
    }

    fn as_separable(&self) -> Option<&dyn SeparableProx> {
        Some(self)
    }

    fn kind(&self) -> ProxKind {
        ProxKind::L1
    }
}
