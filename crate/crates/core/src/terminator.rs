/// Stopping rule consulted before every iterate.
pub trait Terminator: Send {
    /// Returns true when the run should stop.
    fn should_stop(&mut self, k: u64, fval: f64, x: &[f64], g: &[f64]) -> bool;

    /// Fixed iteration budget, if this terminator is nothing more than one.
    /// Lock-free executors use it to hand out update tickets without a lock.
    fn max_iterations(&self) -> Option<u64> {
        None
    }
}

/// Stops once `k` reaches `K`, so exactly `K` iterates run.
#[derive(Debug, Clone, Copy)]
pub struct MaxIter(pub u64);

impl Terminator for MaxIter {
    fn should_stop(&mut self, k: u64, _fval: f64, _x: &[f64], _g: &[f64]) -> bool {
        k >= self.0
    }

    fn max_iterations(&self) -> Option<u64> {
        Some(self.0)
    }
}

pub fn maxiter(k: u64) -> MaxIter {
    MaxIter(k)
}

impl<F> Terminator for F
where
    F: FnMut(u64, f64, &[f64], &[f64]) -> bool + Send,
{
    fn should_stop(&mut self, k: u64, fval: f64, x: &[f64], g: &[f64]) -> bool {
        self(k, fval, x, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxiter_bounds() {
        let mut t = maxiter(2500);
        assert!(!t.should_stop(2499, 0.0, &[], &[]));
        assert!(t.should_stop(2500, 0.0, &[], &[]));
        let mut z = maxiter(0);
        assert!(z.should_stop(0, 0.0, &[], &[]));
        let mut five = maxiter(5);
        let ran = (0..=5)
            .take_while(|&k| !five.should_stop(k, 0.0, &[], &[]))
            .count();
        assert_eq!(ran, 5);
    }
}
