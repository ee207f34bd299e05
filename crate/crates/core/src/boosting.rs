//! Boosting policies: build a search direction out of the current gradient
//! surrogate and whatever the policy remembers from earlier ones.
//!
//! Every policy rewrites `g` in place. `origin` names the component set (or
//! worker) the surrogate came from; only the table-based policies read it.

use std::sync::Mutex;

use crate::atomic::AtomicF64;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostKind {
    None,
    Momentum,
    Nesterov,
    Aggregated,
    Saga,
    Custom,
}

pub trait Boosting: Send {
    /// Sizes internal state for a `dim`-dimensional problem with `slots`
    /// distinct origins. Resets any previous state.
    fn initialize(&mut self, dim: usize, slots: usize) -> Result<()>;

    fn boost(&mut self, origin: usize, k_local: u64, k_global: u64, g: &mut [f64]) -> Result<()>;

    fn kind(&self) -> BoostKind {
        BoostKind::Custom
    }

    /// True when `origin` must identify a component set.
    fn needs_origin(&self) -> bool {
        matches!(self.kind(), BoostKind::Aggregated | BoostKind::Saga)
    }
}

/// Built-in boosting choices with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostConfig {
    None,
    /// `v ← mu·v + eps·g`, direction `v`.
    Momentum {
        mu: f64,
        eps: f64,
    },
    /// `v ← mu·v + eps·g`, direction `mu·v + eps·g`.
    Nesterov {
        mu: f64,
        eps: f64,
    },
    Aggregated,
    Saga,
}

impl BoostConfig {
    pub fn build(&self) -> Box<dyn Boosting> {
        match *self {
            BoostConfig::None => Box::new(NoBoost),
            BoostConfig::Momentum { mu, eps } => Box::new(Momentum::new(mu, eps)),
            BoostConfig::Nesterov { mu, eps } => Box::new(Nesterov::new(mu, eps)),
            BoostConfig::Aggregated => Box::new(Aggregated::default()),
            BoostConfig::Saga => Box::new(Saga::default()),
        }
    }

    pub fn kind(&self) -> BoostKind {
        match self {
            BoostConfig::None => BoostKind::None,
            BoostConfig::Momentum { .. } => BoostKind::Momentum,
            BoostConfig::Nesterov { .. } => BoostKind::Nesterov,
            BoostConfig::Aggregated => BoostKind::Aggregated,
            BoostConfig::Saga => BoostKind::Saga,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoBoost;

impl Boosting for NoBoost {
    fn initialize(&mut self, _dim: usize, _slots: usize) -> Result<()> {
        Ok(())
    }

    fn boost(&mut self, _origin: usize, _kl: u64, _kg: u64, _g: &mut [f64]) -> Result<()> {
        Ok(())
    }

    fn kind(&self) -> BoostKind {
        BoostKind::None
    }
}

/// Classical (heavy-ball) momentum.
#[derive(Debug, Clone)]
pub struct Momentum {
    pub mu: f64,
    pub eps: f64,
    velocity: Vec<f64>,
}

impl Momentum {
    pub fn new(mu: f64, eps: f64) -> Self {
        Self {
            mu,
            eps,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

impl Boosting for Momentum {
    fn initialize(&mut self, dim: usize, _slots: usize) -> Result<()> {
        self.velocity = vec![0.0; dim];
        Ok(())
    }

    fn boost(&mut self, _origin: usize, _kl: u64, _kg: u64, g: &mut [f64]) -> Result<()> {
        check_dim(self.velocity.len(), g.len())?;
        for (v, gi) in self.velocity.iter_mut().zip(g.iter_mut()) {
            *v = self.mu * *v + self.eps * *gi;
            *gi = *v;
        }
        Ok(())
    }

    fn kind(&self) -> BoostKind {
        BoostKind::Momentum
    }
}

/// Nesterov momentum in look-ahead form: the velocity is updated as in
/// classical momentum and the direction extrapolates one more step.
#[derive(Debug, Clone)]
pub struct Nesterov {
    pub mu: f64,
    pub eps: f64,
    velocity: Vec<f64>,
}

impl Nesterov {
    pub fn new(mu: f64, eps: f64) -> Self {
        Self {
            mu,
            eps,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

impl Boosting for Nesterov {
    fn initialize(&mut self, dim: usize, _slots: usize) -> Result<()> {
        self.velocity = vec![0.0; dim];
        Ok(())
    }

    fn boost(&mut self, _origin: usize, _kl: u64, _kg: u64, g: &mut [f64]) -> Result<()> {
        check_dim(self.velocity.len(), g.len())?;
        for (v, gi) in self.velocity.iter_mut().zip(g.iter_mut()) {
            let scaled = self.eps * *gi;
            *v = self.mu * *v + scaled;
            *gi = self.mu * *v + scaled;
        }
        Ok(())
    }

    fn kind(&self) -> BoostKind {
        BoostKind::Nesterov
    }
}

/// Dense per-origin gradient table shared by the aggregated and saga
/// policies.
#[derive(Debug, Clone, Default)]
struct GradTable {
    dim: usize,
    slots: usize,
    rows: Vec<f64>,
}

impl GradTable {
    fn new(dim: usize, slots: usize) -> Self {
        Self {
            dim,
            slots,
            rows: vec![0.0; dim * slots],
        }
    }

    fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut t = Self::new(dim, rows.len());
        for (i, r) in rows.iter().enumerate() {
            check_dim(dim, r.len())?;
            t.row_mut(i).copy_from_slice(r);
        }
        Ok(t)
    }

    fn check(&self, origin: usize, g: &[f64]) -> Result<()> {
        if origin >= self.slots {
            return Err(Error::UnknownOrigin {
                origin,
                slots: self.slots,
            });
        }
        check_dim(self.dim, g.len())
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for i in 0..self.slots {
            for (a, b) in s.iter_mut().zip(self.row(i)) {
                *a += b;
            }
        }
        s
    }
}

/// Incremental aggregated gradient: the direction is the sum of the latest
/// gradient stored for every origin.
#[derive(Debug, Clone, Default)]
pub struct Aggregated {
    table: GradTable,
    aggregate: Vec<f64>,
}

impl Aggregated {
    /// Starts from a pre-populated table (one row per origin).
    pub fn with_table(rows: &[Vec<f64>]) -> Result<Self> {
        let table = GradTable::from_rows(rows)?;
        let aggregate = table.sum();
        Ok(Self { table, aggregate })
    }

    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn stored(&self, origin: usize) -> &[f64] {
        self.table.row(origin)
    }

    pub fn slots(&self) -> usize {
        self.table.slots
    }
}

impl Boosting for Aggregated {
    fn initialize(&mut self, dim: usize, slots: usize) -> Result<()> {
        self.table = GradTable::new(dim, slots);
        self.aggregate = vec![0.0; dim];
        Ok(())
    }

    fn boost(&mut self, origin: usize, _kl: u64, _kg: u64, g: &mut [f64]) -> Result<()> {
        self.table.check(origin, g)?;
        let row = self.table.row_mut(origin);
        for ((agg, stored), gi) in self.aggregate.iter_mut().zip(row.iter_mut()).zip(g.iter_mut()) {
            *agg = *agg - *stored + *gi;
            *stored = *gi;
            *gi = *agg;
        }
        Ok(())
    }

    fn kind(&self) -> BoostKind {
        BoostKind::Aggregated
    }
}

/// SAGA: `g_i − table[i] + mean(table)`, then `table[i] ← g_i`.
#[derive(Debug, Clone, Default)]
pub struct Saga {
    table: GradTable,
    mean: Vec<f64>,
}

impl Saga {
    pub fn with_table(rows: &[Vec<f64>]) -> Result<Self> {
        let table = GradTable::from_rows(rows)?;
        let n = table.slots as f64;
        let mean = table.sum().into_iter().map(|v| v / n).collect();
        Ok(Self { table, mean })
    }

    pub fn table_mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stored(&self, origin: usize) -> &[f64] {
        self.table.row(origin)
    }

    pub fn slots(&self) -> usize {
        self.table.slots
    }
}

impl Boosting for Saga {
    fn initialize(&mut self, dim: usize, slots: usize) -> Result<()> {
        self.table = GradTable::new(dim, slots);
        self.mean = vec![0.0; dim];
        Ok(())
    }

    fn boost(&mut self, origin: usize, _kl: u64, _kg: u64, g: &mut [f64]) -> Result<()> {
        self.table.check(origin, g)?;
        let n = self.table.slots as f64;
        let row = self.table.row_mut(origin);
        for ((m, stored), gi) in self.mean.iter_mut().zip(row.iter_mut()).zip(g.iter_mut()) {
            let fresh = *gi;
            *gi = fresh - *stored + *m;
            *m += (fresh - *stored) / n;
            *stored = fresh;
        }
        Ok(())
    }

    fn kind(&self) -> BoostKind {
        BoostKind::Saga
    }
}

/// SAGA table for lock-free executors. Each slot is updated under its own
/// lock; the mean is kept with indivisible per-coordinate adds.
#[derive(Debug)]
pub struct ConcurrentSaga {
    dim: usize,
    rows: Vec<Mutex<Vec<f64>>>,
    mean: Vec<AtomicF64>,
}

impl ConcurrentSaga {
    pub fn new(dim: usize, slots: usize) -> Self {
        Self {
            dim,
            rows: (0..slots).map(|_| Mutex::new(vec![0.0; dim])).collect(),
            mean: (0..dim).map(|_| AtomicF64::new(0.0)).collect(),
        }
    }

    pub fn boost(&self, origin: usize, g: &mut [f64]) -> Result<()> {
        let slots = self.rows.len();
        let row = self
            .rows
            .get(origin)
            .ok_or(Error::UnknownOrigin { origin, slots })?;
        check_dim(self.dim, g.len())?;
        let n = slots as f64;
        let mut row = row.lock().unwrap_or_else(|e| e.into_inner());
        for ((stored, gi), m) in row.iter_mut().zip(g.iter_mut()).zip(&self.mean) {
            let fresh = *gi;
            let delta = fresh - *stored;
            *gi = fresh - *stored + m.load();
            if delta != 0.0 {
                m.fetch_add(delta / n);
            }
            *stored = fresh;
        }
        Ok(())
    }

    pub fn table_mean(&self) -> Vec<f64> {
        self.mean.iter().map(AtomicF64::load).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(b: &mut dyn Boosting, origin: usize, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        b.boost(origin, 0, 0, &mut out).unwrap();
        out
    }

    #[test]
    fn none_is_identity() {
        let mut b = NoBoost;
        assert_eq!(run(&mut b, 0, &[1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(run(&mut b, 0, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn momentum_recurrence() {
        let mut b = Momentum::new(0.9, 0.1);
        b.initialize(2, 1).unwrap();
        assert_eq!(run(&mut b, 0, &[1.0, 1.0]), vec![0.1, 0.1]);
        let second = run(&mut b, 0, &[1.0, 1.0]);
        // 0.9 * 0.1 + 0.1
        assert!((second[0] - 0.19).abs() < 1e-15);
        assert_eq!(second[0], second[1]);
    }

    #[test]
    fn degenerate_momentum_is_bitwise_identity() {
        let mut b = Momentum::new(0.0, 1.0);
        b.initialize(3, 1).unwrap();
        for g in [[1.5, -2.25, 1e-300], [3.0, 0.1, -7.7]] {
            assert_eq!(run(&mut b, 0, &g), g.to_vec());
        }
    }

    #[test]
    fn nesterov_look_ahead() {
        let mut b = Nesterov::new(0.9, 0.1);
        b.initialize(2, 1).unwrap();
        let out = run(&mut b, 0, &[1.0, 0.0]);
        assert!((b.velocity()[0] - 0.1).abs() < 1e-15);
        assert!((out[0] - 0.19).abs() < 1e-15);
        assert_eq!(out[1], 0.0);

        let mut id = Nesterov::new(0.0, 1.0);
        id.initialize(2, 1).unwrap();
        assert_eq!(run(&mut id, 0, &[3.0, -4.0]), vec![3.0, -4.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let mut b = Momentum::new(0.9, 0.1);
        b.initialize(2, 1).unwrap();
        let mut g = vec![1.0; 3];
        assert!(matches!(
            b.boost(0, 0, 0, &mut g),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn aggregated_update_rule() {
        let mut b = Aggregated::with_table(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(run(&mut b, 0, &[3.0, 0.0]), vec![3.0, 2.0]);

        let mut z = Aggregated::default();
        z.initialize(2, 4).unwrap();
        assert_eq!(run(&mut z, 2, &[0.5, -1.0]), vec![0.5, -1.0]);
        let mut g = vec![0.0; 2];
        assert!(matches!(
            z.boost(4, 0, 0, &mut g),
            Err(Error::UnknownOrigin { origin: 4, slots: 4 })
        ));
    }

    #[test]
    fn saga_update_rule() {
        let mut b = Saga::with_table(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(b.table_mean(), &[1.0, 0.0]);
        assert_eq!(run(&mut b, 0, &[4.0, 0.0]), vec![3.0, 0.0]);
        assert_eq!(b.stored(0), &[4.0, 0.0]);
        assert_eq!(b.table_mean(), &[2.0, 0.0]);

        let gi = vec![1.25, -3.5];
        let mut same = Saga::with_table(&[gi.clone(), gi.clone(), gi.clone()]).unwrap();
        assert_eq!(run(&mut same, 1, &gi), gi);
    }

    #[test]
    fn concurrent_saga_matches_serial() {
        let mut serial = Saga::default();
        serial.initialize(3, 4).unwrap();
        let conc = ConcurrentSaga::new(3, 4);
        let grads = [
            (0, [1.0, 2.0, 0.0]),
            (3, [0.5, -1.0, 4.0]),
            (0, [-2.0, 0.0, 1.0]),
            (2, [0.0, 0.0, 0.0]),
        ];
        for (o, g) in grads {
            let mut a = g.to_vec();
            let mut b = g.to_vec();
            serial.boost(o, 0, 0, &mut a).unwrap();
            conc.boost(o, &mut b).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(serial.table_mean(), &conc.table_mean()[..]);
    }

    #[test]
    fn instances_do_not_share_state() {
        let mut a = Momentum::new(0.9, 0.1);
        let mut b = Momentum::new(0.9, 0.1);
        a.initialize(2, 1).unwrap();
        b.initialize(2, 1).unwrap();
        run(&mut a, 0, &[1.0, 1.0]);
        assert_eq!(b.velocity(), &[0.0, 0.0]);
    }
}
