//! Lock-free executor. Coordinates of `x` live in indivisible cells; reads
//! may mix coordinates from different updates, and every write is a
//! per-coordinate read-modify-write, so no update is ever lost.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::sync::Mutex;
use std::time::Instant;

use super::{elapsed_ns, RunContext, LOG_QUEUE_BOUND};
use crate::atomic::AtomicF64;
use crate::boosting::ConcurrentSaga;
use crate::error::{Error, Result};
use crate::logger::{IterationRecord, Logger};
use crate::loss::Loss;
use crate::prox::SeparableProx;
use crate::solver::{evaluate, DecisionVector};
use crate::step::Step;
use crate::terminator::Terminator;

/// The policy subset the lock-free executor can run.
pub(crate) struct LockFreePolicies<'a> {
    pub saga: bool,
    pub step: &'a dyn Step,
    pub prox: &'a dyn SeparableProx,
}

enum Tickets<'a> {
    /// Fixed budget: tickets come from an atomic counter.
    Budget { claimed: AtomicU64, max: u64 },
    /// General predicate, consulted under a lock.
    Predicate(Mutex<(u64, &'a mut dyn Terminator)>),
}

struct Shared<'a> {
    x: Vec<AtomicF64>,
    saga: Option<ConcurrentSaga>,
    tickets: Tickets<'a>,
    last_fval: AtomicF64,
    stop: AtomicBool,
    error: Mutex<Option<Error>>,
    /// Serialization point for records: (completed updates, sender).
    log: Mutex<(u64, Option<SyncSender<IterationRecord>>)>,
}

impl Shared<'_> {
    fn claim(&self, x: &[f64], g: &[f64]) -> Option<u64> {
        if self.stop.load(Ordering::Acquire) {
            return None;
        }
        match &self.tickets {
            Tickets::Budget { claimed, max } => {
                let t = claimed.fetch_add(1, Ordering::AcqRel);
                (t < *max).then_some(t)
            }
            Tickets::Predicate(m) => {
                let mut guard = m.lock().unwrap_or_else(|e| e.into_inner());
                let (count, term) = &mut *guard;
                if term.should_stop(*count, self.last_fval.load(), x, g) {
                    self.stop.store(true, Ordering::Release);
                    None
                } else {
                    *count += 1;
                    Some(*count - 1)
                }
            }
        }
    }

    fn claimed(&self) -> u64 {
        match &self.tickets {
            Tickets::Budget { claimed, .. } => claimed.load(Ordering::Acquire),
            Tickets::Predicate(m) => m.lock().unwrap_or_else(|e| e.into_inner()).0,
        }
    }

    fn fail(&self, e: Error) {
        self.stop.store(true, Ordering::Release);
        self.error
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get_or_insert(e);
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run<L: Loss + ?Sized>(
    policies: LockFreePolicies<'_>,
    state: &mut DecisionVector,
    ctx: &RunContext<'_, L>,
    terminator: &mut dyn Terminator,
    logger: &mut dyn Logger,
    workers: usize,
    slots: usize,
) -> Result<()> {
    let start = Instant::now();
    let dim = state.dim();
    let wants_x = logger.wants_x();
    let tickets = match terminator.max_iterations() {
        Some(max) => Tickets::Budget {
            claimed: AtomicU64::new(state.k),
            max,
        },
        None => Tickets::Predicate(Mutex::new((state.k, terminator))),
    };
    let (tx, rx) = sync_channel::<IterationRecord>(LOG_QUEUE_BOUND);
    let shared = Shared {
        x: state.x.iter().map(|&v| AtomicF64::new(v)).collect(),
        saga: policies.saga.then(|| ConcurrentSaga::new(dim, slots)),
        tickets,
        last_fval: AtomicF64::new(state.fval),
        stop: AtomicBool::new(false),
        error: Mutex::new(None),
        log: Mutex::new((state.k, Some(tx))),
    };

    let (panicked, last) = std::thread::scope(|s| {
        let log_thread = s.spawn(move || {
            for rec in rx {
                logger.log(rec);
            }
        });
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let shared = &shared;
                let policies = &policies;
                s.spawn(move || worker(w, shared, policies, ctx, start, wants_x))
            })
            .collect();
        let mut panicked = false;
        let mut last: Option<(u64, Vec<f64>)> = None;
        for h in handles {
            match h.join() {
                Ok(Some((k, g))) => {
                    if last.as_ref().is_none_or(|(lk, _)| k >= *lk) {
                        last = Some((k, g));
                    }
                }
                Ok(None) => {}
                Err(_) => panicked = true,
            }
        }
        // closing the channel lets the logger thread finish
        shared.log.lock().unwrap_or_else(|e| e.into_inner()).1 = None;
        panicked |= log_thread.join().is_err();
        (panicked, last)
    });

    let completed = shared.log.lock().unwrap_or_else(|e| e.into_inner()).0;
    state.x = shared.x.iter().map(AtomicF64::load).collect();
    state.k = completed;
    state.fval = shared.last_fval.load();
    if let Some((_, g)) = last {
        state.g = g;
    }
    if let Some(e) = shared.error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    if panicked {
        return Err(Error::WorkerPanic);
    }
    Ok(())
}

/// Returns the completion index and direction of this worker's last update.
fn worker<L: Loss + ?Sized>(
    id: usize,
    shared: &Shared<'_>,
    policies: &LockFreePolicies<'_>,
    ctx: &RunContext<'_, L>,
    start: Instant,
    wants_x: bool,
) -> Option<(u64, Vec<f64>)> {
    let mut sampler = ctx.sampler.fork(id);
    let dim = ctx.dim();
    let mut snapshot = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut last = None;
    let skip_zero = policies.prox.fixes_zero_direction();

    while let Some(ticket) = shared.claim(&snapshot, &g) {
        for (s, cell) in snapshot.iter_mut().zip(&shared.x) {
            *s = cell.load();
        }
        let batch = sampler.next_batch();
        let origin = batch.origin.unwrap_or(0);
        let fval = match evaluate(ctx.loss, &batch, &snapshot, &mut g) {
            Ok(f) => f,
            Err(e) => {
                shared.fail(e);
                break;
            }
        };
        if let Some(saga) = &shared.saga {
            if let Err(e) = saga.boost(origin, &mut g) {
                shared.fail(e);
                break;
            }
        }
        let k_global = shared.claimed().saturating_sub(1).max(ticket);
        let gamma = policies.step.step(ticket, k_global, fval, &snapshot, &g);
        let mut finite = true;
        for (cell, &dj) in shared.x.iter().zip(&g) {
            if dj == 0.0 && skip_zero {
                continue;
            }
            let new = cell.update(|cur| policies.prox.coordinate(gamma, cur, dj));
            finite &= new.is_finite();
        }
        shared.last_fval.store(fval);
        if ctx.check_divergence {
            let what = if !fval.is_finite() {
                Some("loss value")
            } else if !finite {
                Some("decision vector entry")
            } else {
                None
            };
            if let Some(what) = what {
                shared.fail(Error::DivergenceDetected { k: ticket, what });
                break;
            }
        }

        let mut log = shared.log.lock().unwrap_or_else(|e| e.into_inner());
        let k = log.0;
        log.0 += 1;
        if let Some(tx) = &log.1 {
            let record = IterationRecord {
                k,
                t_ns: elapsed_ns(start),
                fval,
                x: wants_x.then(|| shared.x.iter().map(AtomicF64::load).collect()),
            };
            if tx.send(record).is_err() {
                shared.stop.store(true, Ordering::Release);
            }
        }
        drop(log);
        last = Some(k);
    }
    last.map(|k| (k, g))
}
