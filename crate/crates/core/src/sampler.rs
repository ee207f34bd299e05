//! Component samplers.
//!
//! All randomness comes from ChaCha8 seeded through `seed_from_u64`, so a
//! seed pins the index stream across runs and platforms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::partition::balanced_ranges;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// `M` i.i.d. uniform component indices per batch.
    Uniform,
    /// Every component, every iteration.
    FullBatch,
    /// Contiguous balanced blocks of roughly `M` components, visited in order.
    Cyclic,
}

/// One batch of sampled components.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    /// Component-set identity, when the sampler exposes one. Aggregated and
    /// saga boosting index their gradient tables with it.
    pub origin: Option<usize>,
    pub indices: &'a [usize],
    /// True when `indices` covers every component.
    pub full: bool,
}

#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
    n: usize,
    batch: usize,
    seed: u64,
    replacement: bool,
    rng: ChaCha8Rng,
    buf: Vec<usize>,
    perm: Vec<usize>,
    cursor: usize,
    blocks: Vec<std::ops::Range<usize>>,
}

impl Sampler {
    /// Uniform sampling of `batch` components out of `n`, with replacement.
    pub fn uniform(n: usize, batch: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBatch("no components to sample".into()));
        }
        if batch == 0 {
            return Err(Error::InvalidBatch("batch size must be at least 1".into()));
        }
        Ok(Self::raw(SamplerKind::Uniform, n, batch, seed))
    }

    pub fn full_batch(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBatch("no components to sample".into()));
        }
        let mut s = Self::raw(SamplerKind::FullBatch, n, n, 0);
        s.buf = (0..n).collect();
        Ok(s)
    }

    pub fn cyclic(n: usize, batch: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBatch("no components to sample".into()));
        }
        if batch == 0 || batch > n {
            return Err(Error::InvalidBatch(format!(
                "cyclic batch size {batch} outside 1..={n}"
            )));
        }
        let mut s = Self::raw(SamplerKind::Cyclic, n, batch, 0);
        s.blocks = balanced_ranges(n, n.div_ceil(batch));
        Ok(s)
    }

    fn raw(kind: SamplerKind, n: usize, batch: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            batch,
            seed,
            replacement: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: Vec::with_capacity(batch),
            perm: Vec::new(),
            cursor: 0,
            blocks: Vec::new(),
        }
    }

    /// Switches a uniform sampler to epoch shuffling: each epoch visits a
    /// fresh permutation of all components, `batch` at a time.
    pub fn without_replacement(mut self) -> Result<Self> {
        if self.batch > self.n {
            return Err(Error::InvalidBatch(format!(
                "batch size {} exceeds {} components without replacement",
                self.batch, self.n
            )));
        }
        self.replacement = false;
        self.perm = (0..self.n).collect();
        self.cursor = self.n;
        Ok(self)
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of distinct origins the sampler emits, or `None` if batches
    /// carry no component identity (uniform batches larger than one).
    pub fn slots(&self) -> Option<usize> {
        match self.kind {
            SamplerKind::FullBatch => Some(1),
            SamplerKind::Cyclic => Some(self.blocks.len()),
            SamplerKind::Uniform if self.batch == 1 => Some(self.n),
            SamplerKind::Uniform => None,
        }
    }

    /// Number of batches per epoch, `ceil(N / M)`.
    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch)
    }

    /// An independent sampler for worker `worker`. Worker 0 replays this
    /// sampler's stream from the start.
    pub fn fork(&self, worker: usize) -> Self {
        let seed = self
            .seed
            .wrapping_add((worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut s = Self::raw(self.kind, self.n, self.batch, seed);
        s.replacement = self.replacement;
        s.blocks = self.blocks.clone();
        match self.kind {
            SamplerKind::FullBatch => s.buf = (0..self.n).collect(),
            SamplerKind::Cyclic => s.cursor = worker % self.blocks.len(),
            SamplerKind::Uniform if !self.replacement => {
                s.perm = (0..self.n).collect();
                s.cursor = self.n;
            }
            SamplerKind::Uniform => {}
        }
        s
    }

    pub fn next_batch(&mut self) -> Batch<'_> {
        match self.kind {
            SamplerKind::FullBatch => Batch {
                origin: Some(0),
                indices: &self.buf,
                full: true,
            },
            SamplerKind::Cyclic => {
                let block = self.cursor;
                self.cursor = (self.cursor + 1) % self.blocks.len();
                self.buf.clear();
                self.buf.extend(self.blocks[block].clone());
                Batch {
                    origin: Some(block),
                    indices: &self.buf,
                    full: self.blocks.len() == 1,
                }
            }
            SamplerKind::Uniform => {
                self.buf.clear();
                if self.replacement {
                    for _ in 0..self.batch {
                        let i = self.rng.random_range(0..self.n);
                        self.buf.push(i);
                    }
                } else {
                    for _ in 0..self.batch {
                        if self.cursor == self.n {
                            self.perm.shuffle(&mut self.rng);
                            self.cursor = 0;
                        }
                        self.buf.push(self.perm[self.cursor]);
                        self.cursor += 1;
                    }
                }
                Batch {
                    origin: if self.batch == 1 { Some(self.buf[0]) } else { None },
                    indices: &self.buf,
                    full: false,
                }
            }
        }
    }
}
