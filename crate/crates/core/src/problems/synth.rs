//! Seeded synthetic sparse classification data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use super::dataset::SparseDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticLogistic {
    pub n_samples: usize,
    pub n_features: usize,
    pub density: f64,
    /// Standard deviation of the label noise added to the margin.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticLogistic {
    pub fn new(n_samples: usize, n_features: usize, density: f64, seed: u64) -> Self {
        Self {
            n_samples,
            n_features,
            density,
            noise: 1.0,
            seed,
        }
    }

    /// Each feature is present with probability `density`, values are
    /// standard normal, and every nonempty row is scaled to unit norm.
    /// Labels are `sign(⟨a, w⟩ + noise·ξ)` for a hidden normal `w`.
    pub fn generate(&self) -> Result<SparseDataset> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if self.n_samples == 0 || self.n_features == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let present = Bernoulli::new(self.density).expect("density checked above");
        let w: Vec<f64> = (0..self.n_features).map(|_| rng.sample(StandardNormal)).collect();

        let mut ds = SparseDataset::new(self.n_features);
        let mut row = Vec::new();
        for _ in 0..self.n_samples {
            row.clear();
            for j in 0..self.n_features {
                if present.sample(&mut rng) {
                    row.push((j, rng.sample::<f64, _>(StandardNormal)));
                }
            }
            let norm = row.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|e| e.1 /= norm);
            }
            let margin: f64 = row.iter().map(|&(j, v)| v * w[j]).sum();
            let xi: f64 = rng.sample(StandardNormal);
            let label = if margin + self.noise * xi > 0.0 { 1.0 } else { -1.0 };
            ds.push(label, &row)?;
        }
        Ok(ds)
    }
}
