//! Solver assembly: one boosting, smoothing, step and prox policy glued to
//! an executor.

use std::fmt;

use crate::boosting::{BoostConfig, BoostKind, Boosting};
use crate::error::{Error, Result};
use crate::exec;
use crate::logger::Logger;
use crate::loss::Loss;
use crate::prox::{Prox, ProxConfig};
use crate::sampler::{Batch, Sampler};
use crate::smoothing::{SmoothConfig, SmoothKind, Smoothing};
use crate::step::{Step, StepConfig};
use crate::terminator::Terminator;

/// The iterate together with the gradient-surrogate buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub k: u64,
    pub fval: f64,
}

impl DecisionVector {
    pub fn new(x0: Vec<f64>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::Config("decision vector must be non-empty".into()));
        }
        Ok(Self {
            g: vec![0.0; x0.len()],
            x: x0,
            k: 0,
            fval: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        check_finite(self.k, self.fval, &self.x)
    }
}

pub(crate) fn check_finite(k: u64, fval: f64, x: &[f64]) -> Result<()> {
    if !fval.is_finite() {
        return Err(Error::DivergenceDetected {
            k,
            what: "loss value",
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergenceDetected {
            k,
            what: "decision vector entry",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExecutorKind {
    #[default]
    Serial,
    /// Workers share the decision vector behind one exclusive lock.
    Consistent { workers: usize },
    /// Workers update individual coordinates indivisibly, without a lock.
    Inconsistent { workers: usize },
    /// Distributed roles; driven by the parameter-server crate, not by
    /// [`Solver::solve`].
    ParamServer,
}

/// The four algorithm policies of a proximal gradient method.
pub struct Policies {
    pub boosting: Box<dyn Boosting>,
    pub smoothing: Box<dyn Smoothing>,
    pub step: Box<dyn Step>,
    pub prox: Box<dyn Prox>,
}

impl fmt::Debug for Policies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Policies")
            .field("boosting", &self.boosting.kind())
            .field("smoothing", &self.smoothing.kind())
            .field("step", &self.step.kind())
            .field("prox", &self.prox.kind())
            .finish()
    }
}

impl Policies {
    /// Builds the four built-in policies from their configurations.
    pub fn new(boosting: BoostConfig, smoothing: SmoothConfig, step: StepConfig, prox: ProxConfig) -> Self {
        Self {
            boosting: boosting.build(),
            smoothing: smoothing.build(),
            step: step.build(),
            prox: prox.build(),
        }
    }

    pub fn initialize(&mut self, dim: usize, slots: usize) -> Result<()> {
        self.boosting.initialize(dim, slots)?;
        self.smoothing.initialize(dim)
    }

    /// One pass of boost → smooth → step → prox. On entry `g` holds the
    /// gradient surrogate; on exit it holds the scaled direction and `x` the
    /// new iterate. Returns the step size used.
    #[allow(clippy::too_many_arguments)]
    pub fn iterate(
        &mut self,
        origin: usize,
        k_local: u64,
        k_global: u64,
        fval: f64,
        x: &mut Vec<f64>,
        g: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<f64> {
        self.boosting.boost(origin, k_local, k_global, g)?;
        self.smoothing.smooth(k_local, k_global, x, g)?;
        let gamma = self.step.step(k_local, k_global, fval, x, g);
        scratch.resize(x.len(), 0.0);
        self.prox.apply(gamma, x, g, scratch)?;
        std::mem::swap(x, scratch);
        Ok(gamma)
    }
}

/// Collects policy choices; unspecified ones default to
/// none / none / constant(1) / none on the serial executor.
pub struct SolverBuilder {
    boosting: Box<dyn Boosting>,
    smoothing: Box<dyn Smoothing>,
    step: Box<dyn Step>,
    prox: Box<dyn Prox>,
    executor: ExecutorKind,
    check_divergence: bool,
}

impl Default for SolverBuilder {
    fn default() -> Self {
        Self {
            boosting: BoostConfig::None.build(),
            smoothing: SmoothConfig::None.build(),
            step: StepConfig::default().build(),
            prox: ProxConfig::None.build(),
            executor: ExecutorKind::Serial,
            check_divergence: true,
        }
    }
}

impl SolverBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn boosting(self, cfg: BoostConfig) -> Self {
        self.custom_boosting(cfg.build())
    }

    pub fn smoothing(self, cfg: SmoothConfig) -> Self {
        self.custom_smoothing(cfg.build())
    }

    pub fn step(self, cfg: StepConfig) -> Self {
        self.custom_step(cfg.build())
    }

    pub fn prox(self, cfg: ProxConfig) -> Self {
        self.custom_prox(cfg.build())
    }

    pub fn custom_boosting(mut self, b: Box<dyn Boosting>) -> Self {
        self.boosting = b;
        self
    }

    pub fn custom_smoothing(mut self, s: Box<dyn Smoothing>) -> Self {
        self.smoothing = s;
        self
    }

    pub fn custom_step(mut self, s: Box<dyn Step>) -> Self {
        self.step = s;
        self
    }

    pub fn custom_prox(mut self, p: Box<dyn Prox>) -> Self {
        self.prox = p;
        self
    }

    pub fn executor(mut self, e: ExecutorKind) -> Self {
        self.executor = e;
        self
    }

    /// Per-iterate non-finite check; on by default.
    pub fn check_divergence(mut self, on: bool) -> Self {
        self.check_divergence = on;
        self
    }

    /// Validates the policy combination.
    pub fn build(self) -> Result<Solver> {
        validate(
            self.executor,
            self.boosting.kind(),
            self.smoothing.kind(),
            self.prox.as_separable().is_some(),
        )?;
        Ok(Solver {
            policies: Policies {
                boosting: self.boosting,
                smoothing: self.smoothing,
                step: self.step,
                prox: self.prox,
            },
            executor: self.executor,
            check_divergence: self.check_divergence,
            state: None,
            boost_shape: None,
        })
    }
}

/// Legality rules between policies and executors.
pub fn validate(
    executor: ExecutorKind,
    boost: BoostKind,
    smooth: SmoothKind,
    separable_prox: bool,
) -> Result<()> {
    match executor {
        ExecutorKind::Serial | ExecutorKind::ParamServer => {}
        ExecutorKind::Consistent { workers } | ExecutorKind::Inconsistent { workers } if workers == 0 => {
            return Err(Error::Config("at least one worker required".into()));
        }
        ExecutorKind::Consistent { .. } => {}
        ExecutorKind::Inconsistent { .. } => {
            if !separable_prox {
                return Err(Error::IncompatiblePolicies(
                    "the inconsistent executor needs a coordinate-separable prox".into(),
                ));
            }
            if !matches!(boost, BoostKind::None | BoostKind::Saga) {
                return Err(Error::IncompatiblePolicies(format!(
                    "the inconsistent executor supports only none or saga boosting, got {boost:?}"
                )));
            }
            if smooth != SmoothKind::None {
                return Err(Error::IncompatiblePolicies(format!(
                    "the inconsistent executor supports no smoothing, got {smooth:?}"
                )));
            }
        }
    }
    if executor == ExecutorKind::ParamServer && !separable_prox {
        return Err(Error::IncompatiblePolicies(
            "parameter-server masters need a coordinate-separable prox".into(),
        ));
    }
    Ok(())
}

/// Shorthand for [`SolverBuilder`] with built-in policies.
pub fn assemble_solver(
    boosting: BoostConfig,
    smoothing: SmoothConfig,
    step: StepConfig,
    prox: ProxConfig,
    executor: ExecutorKind,
) -> Result<Solver> {
    step.validate().map_err(Error::Config)?;
    SolverBuilder::new()
        .boosting(boosting)
        .smoothing(smoothing)
        .step(step)
        .prox(prox)
        .executor(executor)
        .build()
}

pub struct Solver {
    policies: Policies,
    executor: ExecutorKind,
    check_divergence: bool,
    state: Option<DecisionVector>,
    boost_shape: Option<(usize, usize)>,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("policies", &self.policies)
            .field("executor", &self.executor)
            .field("state", &self.state)
            .finish()
    }
}

impl Solver {
    /// Sets `x₀` and resets all policy state.
    pub fn initialize(&mut self, x0: Vec<f64>) -> Result<()> {
        let state = DecisionVector::new(x0)?;
        self.policies.smoothing.initialize(state.dim())?;
        self.state = Some(state);
        self.boost_shape = None;
        Ok(())
    }

    pub fn executor(&self) -> ExecutorKind {
        self.executor
    }

    pub fn policies(&self) -> &Policies {
        &self.policies
    }

    pub fn state(&self) -> Option<&DecisionVector> {
        self.state.as_ref()
    }

    /// Runs the executor until `terminator` fires and returns the final
    /// iterate. Policy state persists across calls.
    pub fn solve<L, T, G>(
        &mut self,
        loss: &L,
        sampler: &Sampler,
        mut terminator: T,
        mut logger: G,
    ) -> Result<DecisionVector>
    where
        L: Loss + ?Sized,
        T: Terminator,
        G: Logger,
    {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Config("solver not initialized".into()))?;
        let dim = state.dim();
        if loss.dim() != dim {
            return Err(Error::dim(dim, loss.dim()));
        }
        if sampler.n_components() != loss.n_components() {
            return Err(Error::Config(format!(
                "sampler covers {} components but the loss has {}",
                sampler.n_components(),
                loss.n_components()
            )));
        }
        let slots = match (self.policies.boosting.needs_origin(), sampler.slots()) {
            (true, None) => {
                return Err(Error::IncompatiblePolicies(format!(
                    "{:?} boosting needs component identities; uniform batches of {} carry none",
                    self.policies.boosting.kind(),
                    sampler.batch_size()
                )))
            }
            (_, s) => s.unwrap_or(1),
        };
        if self.boost_shape != Some((dim, slots)) {
            self.policies.boosting.initialize(dim, slots)?;
            self.boost_shape = Some((dim, slots));
        }

        let ctx = exec::RunContext {
            loss,
            sampler,
            check_divergence: self.check_divergence,
        };
        match self.executor {
            ExecutorKind::Serial => {
                exec::serial::run(&mut self.policies, state, &ctx, &mut terminator, &mut logger)?
            }
            ExecutorKind::Consistent { workers } => exec::consistent::run(
                &mut self.policies,
                state,
                &ctx,
                &mut terminator,
                &mut logger,
                workers,
            )?,
            ExecutorKind::Inconsistent { workers } => exec::inconsistent::run(
                exec::inconsistent::LockFreePolicies {
                    saga: self.policies.boosting.kind() == BoostKind::Saga,
                    step: &*self.policies.step,
                    prox: self
                        .policies
                        .prox
                        .as_separable()
                        .ok_or_else(|| Error::IncompatiblePolicies("prox is not separable".into()))?,
                },
                state,
                &ctx,
                &mut terminator,
                &mut logger,
                workers,
                slots,
            )?,
            ExecutorKind::ParamServer => {
                return Err(Error::Config(
                    "parameter-server runs are driven by the scheduler, master and worker roles".into(),
                ))
            }
        }
        Ok(state.clone())
    }
}

/// Evaluates the sampled part of the loss.
pub(crate) fn evaluate<L: Loss + ?Sized>(
    loss: &L,
    batch: &Batch<'_>,
    x: &[f64],
    g: &mut [f64],
) -> Result<f64> {
    if batch.full {
        loss.full(x, g)
    } else {
        loss.partial(x, g, batch.indices)
    }
}
