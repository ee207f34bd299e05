use std::sync::atomic::{AtomicU64, Ordering};

/// An `f64` cell with indivisible loads, stores and read-modify-write,
/// built on a compare-and-swap loop over the bit pattern.
#[derive(Debug, Default)]
#[repr(transparent)]
pub struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub fn new(v: f64) -> Self {
        Self(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }

    /// Applies `f` indivisibly and returns the new value.
    #[inline]
    pub fn update(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut cur = self.0.load(Ordering::Relaxed);
        loop {
            let new = f(f64::from_bits(cur)).to_bits();
            match self
                .0
                .compare_exchange_weak(cur, new, Ordering::AcqRel, Ordering::Relaxed)
            {
                Ok(_) => return f64::from_bits(new),
                Err(actual) => cur = actual,
            }
        }
    }

    #[inline]
    pub fn fetch_add(&self, delta: f64) -> f64 {
        self.update(|v| v + delta)
    }
}
