//! Lock-based executor. Workers snapshot `x` under the lock, evaluate the
//! gradient outside it, and apply the whole policy pipeline under it again,
//! so every `x` a worker observes existed at a single instant.

use std::sync::mpsc::{sync_channel, SyncSender};
use std::sync::Mutex;
use std::time::Instant;

use super::{elapsed_ns, RunContext, LOG_QUEUE_BOUND};
use crate::error::{Error, Result};
use crate::logger::{IterationRecord, Logger};
use crate::loss::Loss;
use crate::solver::{evaluate, DecisionVector, Policies};
use crate::terminator::Terminator;

struct Shared<'a> {
    state: &'a mut DecisionVector,
    policies: &'a mut Policies,
    terminator: &'a mut dyn Terminator,
    scratch: Vec<f64>,
    stopped: bool,
    error: Option<Error>,
}

pub(crate) fn run<L: Loss + ?Sized>(
    policies: &mut Policies,
    state: &mut DecisionVector,
    ctx: &RunContext<'_, L>,
    terminator: &mut dyn Terminator,
    logger: &mut dyn Logger,
    workers: usize,
) -> Result<()> {
    let start = Instant::now();
    let wants_x = logger.wants_x();
    let dim = state.dim();
    let shared = Mutex::new(Shared {
        state,
        policies,
        terminator,
        scratch: vec![0.0; dim],
        stopped: false,
        error: None,
    });
    let (tx, rx) = sync_channel::<IterationRecord>(LOG_QUEUE_BOUND);

    let panicked = std::thread::scope(|s| {
        let log_thread = s.spawn(move || {
            for rec in rx {
                logger.log(rec);
            }
        });
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let tx = tx.clone();
                let shared = &shared;
                s.spawn(move || worker(w, shared, ctx, tx, start, wants_x))
            })
            .collect();
        drop(tx);
        let mut panicked = false;
        for h in handles {
            panicked |= h.join().is_err();
        }
        panicked |= log_thread.join().is_err();
        panicked
    });

    let shared = shared.into_inner().unwrap_or_else(|e| e.into_inner());
    if let Some(e) = shared.error {
        return Err(e);
    }
    if panicked {
        return Err(Error::WorkerPanic);
    }
    Ok(())
}

fn worker<L: Loss + ?Sized>(
    id: usize,
    shared: &Mutex<Shared<'_>>,
    ctx: &RunContext<'_, L>,
    tx: SyncSender<IterationRecord>,
    start: Instant,
    wants_x: bool,
) {
    let mut sampler = ctx.sampler.fork(id);
    let dim = ctx.dim();
    let mut snapshot = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let lock = || shared.lock().unwrap_or_else(|e| e.into_inner());

    loop {
        let k_read = {
            let sh = lock();
            if sh.stopped {
                return;
            }
            snapshot.copy_from_slice(&sh.state.x);
            sh.state.k
        };

        let batch = sampler.next_batch();
        let origin = batch.origin.unwrap_or(0);
        let fval = match evaluate(ctx.loss, &batch, &snapshot, &mut g) {
            Ok(f) => f,
            Err(e) => {
                let mut sh = lock();
                sh.stopped = true;
                sh.error.get_or_insert(e);
                return;
            }
        };

        let mut guard = lock();
        let sh = &mut *guard;
        if sh.stopped {
            return;
        }
        let k = sh.state.k;
        if sh
            .terminator
            .should_stop(k, sh.state.fval, &sh.state.x, &sh.state.g)
        {
            sh.stopped = true;
            return;
        }
        sh.state.g.copy_from_slice(&g);
        sh.state.fval = fval;
        let res = sh
            .policies
            .iterate(
                origin,
                k_read,
                k,
                fval,
                &mut sh.state.x,
                &mut sh.state.g,
                &mut sh.scratch,
            )
            .and_then(|_| {
                if ctx.check_divergence {
                    sh.state.check_finite()
                } else {
                    Ok(())
                }
            });
        if let Err(e) = res {
            sh.stopped = true;
            sh.error.get_or_insert(e);
            return;
        }
        let record = IterationRecord {
            k,
            t_ns: elapsed_ns(start),
            fval,
            x: wants_x.then(|| sh.state.x.clone()),
        };
        sh.state.k += 1;
        // sent under the lock so records reach the logger in k order
        if tx.send(record).is_err() {
            sh.stopped = true;
            return;
        }
    }
}
