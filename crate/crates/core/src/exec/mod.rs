//! Single-address-space executors.

use std::time::Instant;

use crate::loss::Loss;
use crate::sampler::Sampler;

pub(crate) mod consistent;
pub(crate) mod inconsistent;
pub(crate) mod serial;

/// Bound on records buffered between concurrent workers and the logger.
pub const LOG_QUEUE_BOUND: usize = 1 << 16;

pub(crate) struct RunContext<'a, L: ?Sized> {
    pub loss: &'a L,
    pub sampler: &'a Sampler,
    pub check_divergence: bool,
}

impl<L: Loss + ?Sized> RunContext<'_, L> {
    pub fn dim(&self) -> usize {
        self.loss.dim()
    }
}

pub(crate) fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos() as u64
}
