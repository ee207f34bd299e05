//! Smoothing policies scale the boosted direction elementwise from
//! second-moment accumulators. The streaming averagers at the bottom are
//! small stand-alone utilities, not solver policies.

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothKind {
    None,
    Adagrad,
    Adadelta,
    Rmsprop,
    Amsgrad,
    Custom,
}

pub trait Smoothing: Send {
    fn initialize(&mut self, dim: usize) -> Result<()>;

    /// Rewrites `g` in place. `x` is the current iterate.
    fn smooth(&mut self, k_local: u64, k_global: u64, x: &[f64], g: &mut [f64]) -> Result<()>;

    fn kind(&self) -> SmoothKind {
        SmoothKind::Custom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothConfig {
    None,
    Adagrad { epsilon: f64 },
    Adadelta { rho: f64, epsilon: f64 },
    Rmsprop { beta: f64, epsilon: f64 },
    Amsgrad { beta: f64, epsilon: f64 },
}

impl SmoothConfig {
    pub fn build(&self) -> Box<dyn Smoothing> {
        match *self {
            SmoothConfig::None => Box::new(NoSmooth),
            SmoothConfig::Adagrad { epsilon } => Box::new(Adagrad::new(epsilon)),
            SmoothConfig::Adadelta { rho, epsilon } => Box::new(Adadelta::new(rho, epsilon)),
            SmoothConfig::Rmsprop { beta, epsilon } => Box::new(Rmsprop::new(beta, epsilon)),
            SmoothConfig::Amsgrad { beta, epsilon } => Box::new(Amsgrad::new(beta, epsilon)),
        }
    }

    pub fn kind(&self) -> SmoothKind {
        match self {
            SmoothConfig::None => SmoothKind::None,
            SmoothConfig::Adagrad { .. } => SmoothKind::Adagrad,
            SmoothConfig::Adadelta { .. } => SmoothKind::Adadelta,
            SmoothConfig::Rmsprop { .. } => SmoothKind::Rmsprop,
            SmoothConfig::Amsgrad { .. } => SmoothKind::Amsgrad,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoSmooth;

impl Smoothing for NoSmooth {
    fn initialize(&mut self, _dim: usize) -> Result<()> {
        Ok(())
    }

    fn smooth(&mut self, _kl: u64, _kg: u64, _x: &[f64], _g: &mut [f64]) -> Result<()> {
        Ok(())
    }

    fn kind(&self) -> SmoothKind {
        SmoothKind::None
    }
}

/// `nu ← nu + g²`, `g ← g / (√nu + ε)`.
#[derive(Debug, Clone)]
pub struct Adagrad {
    pub epsilon: f64,
    nu: Vec<f64>,
}

impl Adagrad {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            nu: Vec::new(),
        }
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

impl Smoothing for Adagrad {
    fn initialize(&mut self, dim: usize) -> Result<()> {
        self.nu = vec![0.0; dim];
        Ok(())
    }

    fn smooth(&mut self, _kl: u64, _kg: u64, _x: &[f64], g: &mut [f64]) -> Result<()> {
        check_dim(self.nu.len(), g.len())?;
        for (nu, gi) in self.nu.iter_mut().zip(g.iter_mut()) {
            *nu += *gi * *gi;
            *gi /= nu.sqrt() + self.epsilon;
        }
        Ok(())
    }

    fn kind(&self) -> SmoothKind {
        SmoothKind::Adagrad
    }
}

/// Exponentially weighted second moment: `nu ← β·nu + (1−β)·g²`,
/// `g ← g / (√nu + ε)`.
#[derive(Debug, Clone)]
pub struct Rmsprop {
    pub beta: f64,
    pub epsilon: f64,
    nu: Vec<f64>,
}

impl Rmsprop {
    pub fn new(beta: f64, epsilon: f64) -> Self {
        Self {
            beta,
            epsilon,
            nu: Vec::new(),
        }
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

impl Smoothing for Rmsprop {
    fn initialize(&mut self, dim: usize) -> Result<()> {
        self.nu = vec![0.0; dim];
        Ok(())
    }

    fn smooth(&mut self, _kl: u64, _kg: u64, _x: &[f64], g: &mut [f64]) -> Result<()> {
        check_dim(self.nu.len(), g.len())?;
        for (nu, gi) in self.nu.iter_mut().zip(g.iter_mut()) {
            *nu = self.beta * *nu + (1.0 - self.beta) * *gi * *gi;
            *gi /= nu.sqrt() + self.epsilon;
        }
        Ok(())
    }

    fn kind(&self) -> SmoothKind {
        SmoothKind::Rmsprop
    }
}

/// AdaDelta. Unlike the others, ε sits inside the square roots.
#[derive(Debug, Clone)]
pub struct Adadelta {
    pub rho: f64,
    pub epsilon: f64,
    nu: Vec<f64>,
    ex: Vec<f64>,
}

impl Adadelta {
    pub fn new(rho: f64, epsilon: f64) -> Self {
        Self {
            rho,
            epsilon,
            nu: Vec::new(),
            ex: Vec::new(),
        }
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn ex(&self) -> &[f64] {
        &self.ex
    }
}

impl Smoothing for Adadelta {
    fn initialize(&mut self, dim: usize) -> Result<()> {
        self.nu = vec![0.0; dim];
        self.ex = vec![0.0; dim];
        Ok(())
    }

    fn smooth(&mut self, _kl: u64, _kg: u64, _x: &[f64], g: &mut [f64]) -> Result<()> {
        check_dim(self.nu.len(), g.len())?;
        let (rho, eps) = (self.rho, self.epsilon);
        for ((nu, ex), gi) in self.nu.iter_mut().zip(self.ex.iter_mut()).zip(g.iter_mut()) {
            *nu = rho * *nu + (1.0 - rho) * *gi * *gi;
            let delta = (*ex + eps).sqrt() / (*nu + eps).sqrt() * *gi;
            *ex = rho * *ex + (1.0 - rho) * delta * delta;
            *gi = delta;
        }
        Ok(())
    }

    fn kind(&self) -> SmoothKind {
        SmoothKind::Adadelta
    }
}

/// AMSGrad: RMSprop whose denominator uses the running elementwise maximum
/// of the second moment.
#[derive(Debug, Clone)]
pub struct Amsgrad {
    pub beta: f64,
    pub epsilon: f64,
    nu: Vec<f64>,
    nu_hat: Vec<f64>,
}

impl Amsgrad {
    pub fn new(beta: f64, epsilon: f64) -> Self {
        Self {
            beta,
            epsilon,
            nu: Vec::new(),
            nu_hat: Vec::new(),
        }
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn nu_hat(&self) -> &[f64] {
        &self.nu_hat
    }
}

impl Default for Amsgrad {
    fn default() -> Self {
        Self::new(0.99, 1e-6)
    }
}

impl Smoothing for Amsgrad {
    fn initialize(&mut self, dim: usize) -> Result<()> {
        self.nu = vec![0.0; dim];
        self.nu_hat = vec![0.0; dim];
        Ok(())
    }

    fn smooth(&mut self, _kl: u64, _kg: u64, _x: &[f64], g: &mut [f64]) -> Result<()> {
        check_dim(self.nu.len(), g.len())?;
        for ((nu, nu_hat), gi) in self.nu.iter_mut().zip(self.nu_hat.iter_mut()).zip(g.iter_mut()) {
            let g_val = *gi;
            *nu = self.beta * *nu + (1.0 - self.beta) * g_val * g_val;
            *nu_hat = nu_hat.max(*nu);
            *gi = g_val / (nu_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }

    fn kind(&self) -> SmoothKind {
        SmoothKind::Amsgrad
    }
}

/// Running average of a vector stream.
pub trait StreamAverage {
    /// Folds `x` into the average and returns the updated average.
    fn push(&mut self, x: &[f64]) -> Result<&[f64]>;
}

/// Exponential moving average `avg ← (1−α)·avg + α·x`.
#[derive(Debug, Clone)]
pub struct Ema {
    pub alpha: f64,
    average: Vec<f64>,
}

impl Ema {
    pub fn new(alpha: f64, initial: &[f64]) -> Self {
        Self {
            alpha,
            average: initial.to_vec(),
        }
    }
}

impl StreamAverage for Ema {
    fn push(&mut self, x: &[f64]) -> Result<&[f64]> {
        check_dim(self.average.len(), x.len())?;
        for (a, xi) in self.average.iter_mut().zip(x) {
            *a = (1.0 - self.alpha) * *a + self.alpha * xi;
        }
        Ok(&self.average)
    }
}

/// Cumulative moving average `avg ← (n·avg + x) / (n + 1)`.
#[derive(Debug, Clone)]
pub struct Cma {
    count: u64,
    average: Vec<f64>,
}

impl Cma {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            average: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

impl StreamAverage for Cma {
    fn push(&mut self, x: &[f64]) -> Result<&[f64]> {
        check_dim(self.average.len(), x.len())?;
        let n = self.count as f64;
        for (a, xi) in self.average.iter_mut().zip(x) {
            *a = (n * *a + xi) / (n + 1.0);
        }
        self.count += 1;
        Ok(&self.average)
    }
}

pub fn sum_squared(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0, |acc: f64, x| if x.abs() > acc { x.abs() } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn once(s: &mut dyn Smoothing, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        s.smooth(0, 0, &vec![0.0; g.len()], &mut out).unwrap();
        out
    }

    #[test]
    fn none_is_identity() {
        let mut s = NoSmooth;
        assert_eq!(once(&mut s, &[1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(once(&mut s, &[0.0]), vec![0.0]);
    }

    #[test]
    fn adagrad_first_call_normalizes() {
        let mut s = Adagrad::new(0.0);
        s.initialize(2).unwrap();
        assert_eq!(once(&mut s, &[3.0, 4.0]), vec![1.0, 1.0]);
        let second = once(&mut s, &[3.0, 4.0]);
        for v in second {
            assert!((v - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn adagrad_zero_gradient_leaves_nu() {
        let mut s = Adagrad::new(1e-8);
        s.initialize(2).unwrap();
        once(&mut s, &[1.0, 2.0]);
        let before = s.nu().to_vec();
        assert_eq!(once(&mut s, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(s.nu(), &before[..]);
    }

    #[test]
    fn adagrad_scale_strictly_decreases() {
        let mut s = Adagrad::new(1e-8);
        s.initialize(3).unwrap();
        let g = [0.3, -2.0, 5.0];
        let mut prev = once(&mut s, &g);
        for _ in 0..50 {
            let cur = once(&mut s, &g);
            for (c, p) in cur.iter().zip(&prev) {
                assert!(c.abs() < p.abs());
            }
            prev = cur;
        }
    }

    #[test]
    fn rmsprop_first_call() {
        let mut s = Rmsprop::new(0.999, 1e-8);
        s.initialize(2).unwrap();
        let out = once(&mut s, &[1.0, 0.0]);
        assert!((s.nu()[0] - 0.001).abs() < 1e-18);
        assert!((out[0] - 31.6227766).abs() < 1e-5);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn rmsprop_beta_zero_is_sign_like() {
        let mut s = Rmsprop::new(0.0, 0.0);
        s.initialize(3).unwrap();
        assert_eq!(once(&mut s, &[2.5, -0.1, 7.0]), vec![1.0, -1.0, 1.0]);

        let eps = 1e-3;
        let mut r = Rmsprop::new(0.0, eps);
        r.initialize(3).unwrap();
        let g = [2.5, -0.1, 7.0];
        let out = once(&mut r, &g);
        for (o, gi) in out.iter().zip(g) {
            assert_eq!(*o, gi / ((gi * gi).sqrt() + eps));
        }
    }

    #[test]
    fn rmsprop_constant_stream_converges() {
        let mut s = Rmsprop::new(0.9, 1e-8);
        s.initialize(2).unwrap();
        let g = [2.0, -0.5];
        let mut out = vec![];
        for _ in 0..2000 {
            out = once(&mut s, &g);
        }
        for (o, gi) in out.iter().zip(g) {
            assert!((o - gi / (gi.abs() + 1e-8)).abs() < 1e-9);
        }
    }

    #[test]
    fn adadelta_first_call() {
        let mut s = Adadelta::new(0.9, 1e-6);
        s.initialize(1).unwrap();
        let out = once(&mut s, &[1.0]);
        assert!((s.nu()[0] - 0.1).abs() < 1e-16);
        let expected = (1e-6f64).sqrt() / (0.1f64 + 1e-6).sqrt();
        assert!((out[0] - expected).abs() < 1e-18);
        assert!((out[0] - 3.1623e-3).abs() < 1e-6);

        let ex_before = s.ex()[0];
        assert_eq!(once(&mut s, &[0.0]), vec![0.0]);
        assert_eq!(s.ex()[0], 0.9 * ex_before);
    }

    #[test]
    fn adadelta_first_call_bound() {
        let (rho, eps) = (0.95, 1e-6);
        for g in [1e-3, 0.5, -3.0, 40.0] {
            let mut s = Adadelta::new(rho, eps);
            s.initialize(1).unwrap();
            let out = once(&mut s, &[g]);
            let bound = g.abs() * (eps / ((1.0 - rho) * g * g + eps)).sqrt();
            assert!(out[0].abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn amsgrad_first_call() {
        let mut s = Amsgrad::new(0.99, 1e-6);
        s.initialize(1).unwrap();
        let out = once(&mut s, &[1.0]);
        assert!((s.nu()[0] - 0.01).abs() < 1e-17);
        assert_eq!(s.nu_hat()[0], s.nu()[0]);
        assert!((out[0] - 1.0 / (0.1 + 1e-6)).abs() < 1e-9);
        assert!((out[0] - 9.99990).abs() < 1e-5);
    }

    #[test]
    fn amsgrad_retains_max_after_large_step() {
        let mut s = Amsgrad::new(0.9, 1e-8);
        s.initialize(1).unwrap();
        once(&mut s, &[10.0]);
        let peak = s.nu_hat()[0];
        let damped = once(&mut s, &[0.1]);
        // nu drops below the stored peak, so the peak divides
        assert!(s.nu()[0] < peak);
        assert_eq!(s.nu_hat()[0], peak);
        assert!((damped[0] - 0.1 / (peak.sqrt() + 1e-8)).abs() < 1e-15);

        let mut z = Amsgrad::new(0.9, 1e-8);
        z.initialize(2).unwrap();
        for _ in 0..5 {
            assert_eq!(once(&mut z, &[0.0, 0.0]), vec![0.0, 0.0]);
            assert_eq!(z.nu_hat(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn smoothing_dimension_mismatch() {
        let mut s = Amsgrad::default();
        s.initialize(2).unwrap();
        let mut g = vec![0.0; 1];
        assert!(matches!(
            s.smooth(0, 0, &[], &mut g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ema_and_cma_vectors() {
        let mut e = Ema::new(0.5, &[0.0, 0.0]);
        assert_eq!(sum_squared(e.push(&[3.0, 4.0]).unwrap()), 6.25);
        assert_eq!(e.push(&[6.0, 8.0]).unwrap(), &[3.75, 5.0]);
        assert_eq!(sum_squared(&[3.75, 5.0]), 39.0625);

        let mut c = Cma::new(2);
        assert_eq!(c.push(&[3.0, 4.0]).unwrap(), &[3.0, 4.0]);
        assert_eq!(max_abs(&[3.0, 4.0]), 4.0);
        assert_eq!(c.push(&[6.0, 8.0]).unwrap(), &[4.5, 6.0]);
        assert_eq!(max_abs(&[4.5, 6.0]), 6.0);
    }

    #[test]
    fn ema_alpha_one_forgets() {
        let mut e = Ema::new(1.0, &[9.0, 9.0]);
        assert_eq!(e.push(&[1.0, -2.0]).unwrap(), &[1.0, -2.0]);
    }

    #[test]
    fn cma_matches_brute_force_mean() {
        let mut c = Cma::new(3);
        let mut seen: Vec<[f64; 3]> = Vec::new();
        for t in 0..40 {
            let t = t as f64;
            let v = [0.1 * t, -7.3 + t.sin(), 1e5 / (1.0 + t)];
            seen.push(v);
            let avg = c.push(&v).unwrap().to_vec();
            for j in 0..3 {
                let mean = seen.iter().map(|s| s[j]).sum::<f64>() / seen.len() as f64;
                assert!((avg[j] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            }
        }
        assert!(matches!(c.push(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
