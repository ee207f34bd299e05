//! Runs a whole topology inside one process over loopback sockets.

use std::thread;
use std::time::Duration;

use proxpol::{Loss, Policies, Sampler, VecLogger};

use crate::master::{run_master, MasterConfig, MasterReport};
use crate::scheduler::{Scheduler, SchedulerConfig, SchedulerReport};
use crate::worker::{run_worker, WorkerConfig, WorkerReport};
use crate::Result;

pub struct LocalCluster {
    pub masters: usize,
    pub x0: Vec<f64>,
    /// Updates each master applies before the run ends.
    pub max_updates: u64,
    pub snapshot_every: u64,
    pub worker_timeout: Duration,
}

pub struct ClusterReport {
    pub scheduler: SchedulerReport,
    /// Sorted by master id.
    pub masters: Vec<MasterReport>,
    /// In the order the workers were given.
    pub workers: Vec<(WorkerReport, VecLogger)>,
}

impl ClusterReport {
    /// The final decision vector stitched together from the master shards.
    pub fn x(&self) -> Vec<f64> {
        self.masters.iter().flat_map(|m| m.x.iter().copied()).collect()
    }

    /// Full decision vectors at the snapshot points every master recorded.
    pub fn snapshots(&self) -> Vec<(u64, Vec<f64>)> {
        let Some(first) = self.masters.first() else {
            return Vec::new();
        };
        first
            .snapshots
            .iter()
            .filter_map(|rec| {
                let mut x = Vec::new();
                for m in &self.masters {
                    let snap = m.snapshots.iter().find(|r| r.k == rec.k)?;
                    x.extend_from_slice(snap.x.as_ref()?);
                }
                Some((rec.k, x))
            })
            .collect()
    }
}

impl LocalCluster {
    pub fn new(masters: usize, x0: Vec<f64>, max_updates: u64) -> Self {
        Self {
            masters,
            x0,
            max_updates,
            snapshot_every: 0,
            worker_timeout: crate::scheduler::DEFAULT_WORKER_TIMEOUT,
        }
    }

    /// Starts a scheduler, `self.masters` masters built by `policies`, and
    /// one worker per `(loss, sampler)` pair with ids `0, 1, …`.
    pub fn run<L, F>(&self, policies: F, workers: &[(L, Sampler)]) -> Result<ClusterReport>
    where
        L: Loss + Send + Sync,
        F: Fn() -> Policies,
    {
        let mut sched_cfg = SchedulerConfig::new(self.masters, self.x0.len(), self.max_updates).ephemeral();
        sched_cfg.worker_timeout = self.worker_timeout;
        let scheduler = Scheduler::bind(sched_cfg)?;
        let addrs = scheduler.addrs();
        let stacks: Vec<Policies> = (0..self.masters).map(|_| policies()).collect();

        thread::scope(|s| {
            let sched = s.spawn(move || scheduler.run());
            let masters: Vec<_> = stacks
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut cfg = MasterConfig::new(i as u32, addrs.control, self.x0.clone());
                    cfg.bind.set_port(0);
                    cfg.max_updates = Some(self.max_updates);
                    cfg.slots = workers.len().max(1);
                    cfg.snapshot_every = self.snapshot_every;
                    s.spawn(move || run_master(cfg, p))
                })
                .collect();
            let handles: Vec<_> = workers
                .iter()
                .enumerate()
                .map(|(i, (loss, sampler))| {
                    let mut cfg = WorkerConfig::new(addrs.publish, addrs.directory);
                    cfg.worker_id = Some(i as u32);
                    s.spawn(move || {
                        let mut log = VecLogger::new();
                        run_worker(&cfg, loss, sampler, &mut log).map(|r| (r, log))
                    })
                })
                .collect();

            let worker_results: Vec<_> = handles.into_iter().map(join).collect();
            let master_results: Vec<_> = masters.into_iter().map(join).collect();
            let scheduler = join(sched)?;
            let mut masters = master_results.into_iter().collect::<Result<Vec<_>>>()?;
            masters.sort_by_key(|m| m.master_id);
            let workers = worker_results.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(ClusterReport {
                scheduler,
                masters,
                workers,
            })
        })
    }
}

fn join<T>(h: thread::ScopedJoinHandle<'_, Result<T>>) -> Result<T> {
    h.join()
        .unwrap_or_else(|_| Err(proxpol::Error::WorkerPanic.into()))
}
