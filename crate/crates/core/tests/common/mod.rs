#![allow(dead_code)]

use proxpol::problems::{LogisticLoss, SyntheticLogistic};
use proxpol::prox::ProxConfig;
use proxpol::Loss;

pub fn quadratic_half() -> impl Loss {
    proxpol::FnLoss::new(1, |x: &[f64], g: &mut [f64]| {
        g[0] = x[0];
        0.5 * x[0] * x[0]
    })
}

pub fn small_logistic(n: usize, d: usize, density: f64, seed: u64) -> LogisticLoss {
    LogisticLoss::new(SyntheticLogistic::new(n, d, density, seed).generate().unwrap())
}

/// `F(x) + h(x)` at `x`.
pub fn composite(loss: &dyn Loss, prox: &ProxConfig, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    loss.full(x, &mut g).unwrap() + prox.regularizer(x)
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
