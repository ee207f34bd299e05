//! Parameter-server execution for `proxpol`.
//!
//! Three roles talk over TCP using the framing in [`codec`]:
//!
//! * the [`scheduler`] keeps the master registry, answers coordinate
//!   lookups, tracks worker liveness and ends the run;
//! * each [`master`] owns a contiguous shard of `x` and applies the policy
//!   pipeline to every gradient piece pushed to it;
//! * each [`worker`] owns part of the data, pulls the current `x`, and
//!   pushes gradient pieces back.
//!
//! [`cluster::LocalCluster`] wires all three together in one process.

pub mod cluster;
pub mod codec;
mod error;
pub mod master;
mod net;
pub mod scheduler;
pub mod worker;

pub use cluster::{ClusterReport, LocalCluster};
pub use codec::{decode, encode, CodecError, MasterInfo, Message};
pub use error::{PsError, Result};
pub use master::{run_master, MasterConfig, MasterReport};
pub use scheduler::{Scheduler, SchedulerAddrs, SchedulerConfig, SchedulerPorts, SchedulerReport};
pub use worker::{run_worker, WorkerConfig, WorkerReport};
