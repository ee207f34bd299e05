//! Proximal gradient methods assembled from orthogonal policies.
//!
//! An algorithm is a choice of four policies, applied in a fixed order on
//! every iterate:
//!
//! ```text
//! g ← gradient surrogate at x
//! g ← boost(g)          none | momentum | nesterov | aggregated | saga
//! g ← smooth(g, x)      none | adagrad | adadelta | rmsprop | amsgrad
//! γ ← step(k, g, x)     constant | decreasing
//! x ← prox_γh(x − γg)   none | l1
//! ```
//!
//! plus an executor deciding where the loop runs: serially, on threads that
//! share `x` behind a lock, or on threads updating single coordinates
//! without one. The distributed parameter-server executor lives in its own
//! crate and reuses [`Policies`] on each master shard.
//!
//! ```
//! use proxpol::prelude::*;
//!
//! // Adam without bias correction: momentum boosting + rmsprop smoothing
//! let mut adam = assemble_solver(
//!     BoostConfig::Momentum { mu: 0.9, eps: 0.1 },
//!     SmoothConfig::Rmsprop { beta: 0.999, epsilon: 1e-8 },
//!     StepConfig::Constant { gamma: 0.01 },
//!     ProxConfig::None,
//!     ExecutorKind::Serial,
//! )
//! .unwrap();
//! adam.initialize(vec![3.0, -2.0]).unwrap();
//! let loss = FnLoss::new(2, |x: &[f64], g: &mut [f64]| {
//!     g.copy_from_slice(x);
//!     0.5 * (x[0] * x[0] + x[1] * x[1])
//! });
//! let sampler = Sampler::full_batch(1).unwrap();
//! let out = adam.solve(&loss, &sampler, maxiter(500), NullLogger).unwrap();
//! assert!(out.x.iter().all(|v| v.abs() < 0.1));
//! ```

pub mod atomic;
pub mod boosting;
pub mod error;
mod exec;
pub mod logger;
pub mod loss;
pub mod partition;
pub mod problems;
pub mod prox;
pub mod sampler;
pub mod smoothing;
pub mod solver;
pub mod step;
pub mod terminator;

pub use error::{Error, Result};
pub use exec::LOG_QUEUE_BOUND;
pub use logger::{CsvLogger, IterationRecord, Logger, NullLogger, VecLogger};
pub use loss::{FnLoss, Loss};
pub use sampler::{Batch, Sampler, SamplerKind};
pub use solver::{assemble_solver, DecisionVector, ExecutorKind, Policies, Solver, SolverBuilder};
pub use terminator::{maxiter, MaxIter, Terminator};

pub mod prelude {
    pub use crate::boosting::{BoostConfig, BoostKind, Boosting};
    pub use crate::logger::{CsvLogger, IterationRecord, Logger, NullLogger, VecLogger};
    pub use crate::loss::{FnLoss, Loss};
    pub use crate::prox::{Prox, ProxConfig, SeparableProx};
    pub use crate::sampler::{Sampler, SamplerKind};
    pub use crate::smoothing::{SmoothConfig, SmoothKind, Smoothing};
    pub use crate::solver::{assemble_solver, DecisionVector, ExecutorKind, Policies, Solver, SolverBuilder};
    pub use crate::step::{Step, StepConfig};
    pub use crate::terminator::{maxiter, MaxIter, Terminator};
    pub use crate::{Error, Result};
}
