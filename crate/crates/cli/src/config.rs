//! Run configuration: command-line flags layered over an optional TOML file
//! layered over built-in defaults.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde::Deserialize;

use proxpol::boosting::BoostConfig;
use proxpol::prox::ProxConfig;
use proxpol::smoothing::SmoothConfig;
use proxpol::step::StepConfig;
use proxpol::{Error as CoreError, ExecutorKind};
use proxpol_ps::scheduler::{DEFAULT_CONTROL_PORT, DEFAULT_DIRECTORY_PORT, DEFAULT_PUBLISH_PORT};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Qp,
    Logistic,
}

/// Named algorithm presets. Explicit policy flags override the preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Gd,
    Sgd,
    Iag,
    Piag,
    Saga,
    Momentum,
    Nesterov,
    Adagrad,
    Adadelta,
    Adam,
    Nadam,
    Amsgrad,
    Adadelay,
    Hogwild,
    Asaga,
    Proxasaga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostName {
    None,
    Momentum,
    Nesterov,
    Aggregated,
    Saga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothName {
    None,
    Adagrad,
    Adadelta,
    Rmsprop,
    Amsgrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepName {
    Constant,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxName {
    None,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecName {
    Serial,
    Consistent,
    Inconsistent,
    Paramserver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerName {
    Full,
    Uniform,
    Cyclic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Standalone,
    Scheduler,
    Master,
    Worker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// Derived from the problem's smoothness constant.
    Auto,
    Value(f64),
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Gamma::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Gamma::Value(v)),
            _ => Err(format!("expected a positive number or `auto`, got {s:?}")),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Auto => f.write_str("auto"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Gamma::from_str(&v.to_string()),
            Raw::Str(s) => Gamma::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Every setting of `run`. All fields are optional so that flags and file
/// can be merged before defaults are applied.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// TOML file with the same keys as the long flags; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// LIBSVM file for the logistic problem.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// QP parameter file written by `generate-qp`; overrides d, mu, L.
    #[arg(long)]
    pub qp_file: Option<PathBuf>,
    /// QP dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Smallest QP eigenvalue.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Largest QP eigenvalue.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,

    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    #[arg(long, value_enum)]
    pub boost: Option<BoostName>,
    #[arg(long, value_enum)]
    pub smooth: Option<SmoothName>,
    #[arg(long, value_enum)]
    pub step: Option<StepName>,
    #[arg(long, value_enum)]
    pub prox: Option<ProxName>,

    /// Step size, or `auto`.
    #[arg(long)]
    pub gamma: Option<Gamma>,
    /// Momentum decay.
    #[arg(long)]
    pub boost_mu: Option<f64>,
    /// Momentum scale.
    #[arg(long)]
    pub boost_eps: Option<f64>,
    /// Smoothing decay (rho for adadelta).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Smoothing regularizer.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Exponent of the decreasing step.
    #[arg(long)]
    pub p: Option<f64>,

    #[arg(long, value_enum)]
    pub executor: Option<ExecName>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Iteration budget (per master for parameter-server runs).
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<u64>,
    /// Mini-batch size.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerName>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Log the full composite objective at each new iterate instead of the
    /// sampled loss.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub log_objective: Option<bool>,
    /// Print the resolved configuration and exit.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip)]
    pub dry_run: Option<bool>,

    #[arg(long, value_enum)]
    pub role: Option<Role>,
    /// Scheduler address.
    #[arg(long)]
    pub scheduler: Option<IpAddr>,
    #[arg(long)]
    pub control_port: Option<u16>,
    #[arg(long)]
    pub publish_port: Option<u16>,
    #[arg(long)]
    pub directory_port: Option<u16>,
    /// Number of masters the scheduler waits for.
    #[arg(long)]
    pub masters: Option<usize>,
    #[arg(long)]
    pub master_id: Option<u32>,
    /// Address a master binds and advertises.
    #[arg(long)]
    pub master_host: Option<Ipv4Addr>,
    /// Master listening port (0 picks a free one).
    #[arg(long)]
    pub master_port: Option<u16>,
    #[arg(long)]
    pub worker_id: Option<u32>,
    /// This worker's data shard, out of `--shards`.
    #[arg(long)]
    pub shard: Option<usize>,
    #[arg(long)]
    pub shards: Option<usize>,
    #[arg(long)]
    pub worker_timeout_ms: Option<u64>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr; $($f:ident),* $(,)?) => {
        $( if $hi.$f.is_none() { $hi.$f = $lo.$f.clone(); } )*
    };
}

impl RunArgs {
    /// Fills every unset field from `file`.
    pub fn over(mut self, file: RunArgs) -> Self {
        layer!(self, file;
            problem, data, qp_file, d, mu, l, algo, boost, smooth, step, prox, gamma,
            boost_mu, boost_eps, beta, epsilon, lambda1, p, executor, workers, k, m,
            sampler, seed, out, log_objective, role, scheduler, control_port,
            publish_port, directory_port, masters, master_id, master_host, master_port,
            worker_id, shard, shards, worker_timeout_ms,
        );
        self
    }

    /// Reads `--config` if given and layers it under the flags.
    pub fn with_file(self) -> Result<Self, CliError> {
        match &self.config {
            Some(path) => {
                let file = load_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }
}

pub fn load_file(path: &Path) -> Result<RunArgs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Qp {
        d: usize,
        mu: f64,
        l: f64,
        file: Option<PathBuf>,
    },
    Logistic {
        data: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub scheduler: IpAddr,
    pub control_port: u16,
    pub publish_port: u16,
    pub directory_port: u16,
    pub masters: usize,
    pub master_id: Option<u32>,
    pub master_host: Ipv4Addr,
    pub master_port: u16,
    pub worker_id: Option<u32>,
    pub shard: usize,
    pub shards: usize,
    pub worker_timeout: Duration,
}

/// A validated run. The step size may still be `auto`; it is settled once
/// the problem is loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub boost: BoostConfig,
    pub smooth: SmoothConfig,
    pub step: StepName,
    pub gamma: Gamma,
    pub p: f64,
    pub prox: ProxConfig,
    pub executor: ExecutorKind,
    /// Worker count; for masters, the minimum gradient-table size.
    pub workers: usize,
    pub k: u64,
    pub m: usize,
    pub sampler: SamplerName,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub log_objective: bool,
    pub dry_run: bool,
    pub role: Role,
    pub topology: Topology,
}

pub const DEFAULT_MASTERS: usize = 1;

struct Preset {
    boost: BoostName,
    smooth: SmoothName,
    step: StepName,
    prox: ProxName,
    executor: ExecName,
    sampler: SamplerName,
}

fn preset(algo: Algo) -> Preset {
    use Algo::*;
    let (boost, smooth, step, prox) = match algo {
        Gd | Sgd | Hogwild => (
            BoostName::None,
            SmoothName::None,
            StepName::Constant,
            ProxName::None,
        ),
        Iag => (
            BoostName::Aggregated,
            SmoothName::None,
            StepName::Constant,
            ProxName::None,
        ),
        Piag => (
            BoostName::Aggregated,
            SmoothName::None,
            StepName::Constant,
            ProxName::L1,
        ),
        Saga | Proxasaga => (
            BoostName::Saga,
            SmoothName::None,
            StepName::Constant,
            ProxName::L1,
        ),
        Asaga => (
            BoostName::Saga,
            SmoothName::None,
            StepName::Constant,
            ProxName::None,
        ),
        Momentum => (
            BoostName::Momentum,
            SmoothName::None,
            StepName::Constant,
            ProxName::None,
        ),
        Nesterov => (
            BoostName::Nesterov,
            SmoothName::None,
            StepName::Constant,
            ProxName::None,
        ),
        Adagrad => (
            BoostName::None,
            SmoothName::Adagrad,
            StepName::Constant,
            ProxName::None,
        ),
        Adadelta => (
            BoostName::None,
            SmoothName::Adadelta,
            StepName::Constant,
            ProxName::None,
        ),
        Adam => (
            BoostName::Momentum,
            SmoothName::Rmsprop,
            StepName::Constant,
            ProxName::None,
        ),
        Nadam => (
            BoostName::Nesterov,
            SmoothName::Rmsprop,
            StepName::Constant,
            ProxName::None,
        ),
        Amsgrad => (
            BoostName::Momentum,
            SmoothName::Amsgrad,
            StepName::Constant,
            ProxName::None,
        ),
        Adadelay => (
            BoostName::None,
            SmoothName::None,
            StepName::Decreasing,
            ProxName::L1,
        ),
    };
    let executor = match algo {
        Hogwild | Asaga | Proxasaga => ExecName::Inconsistent,
        _ => ExecName::Serial,
    };
    let sampler = match algo {
        Gd | Momentum | Nesterov => SamplerName::Full,
        Iag | Piag => SamplerName::Cyclic,
        _ => SamplerName::Uniform,
    };
    Preset {
        boost,
        smooth,
        step,
        prox,
        executor,
        sampler,
    }
}

fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{flag} must be positive, got {v}")))
    }
}

fn unit_interval(flag: &str, v: f64) -> Result<f64, CliError> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{flag} must lie in [0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn from_args(a: RunArgs) -> Result<Self, CliError> {
        let algo = a.algo.unwrap_or(Algo::Gd);
        let pre = preset(algo);

        let problem = match a.problem.unwrap_or(if a.data.is_some() {
            ProblemKind::Logistic
        } else {
            ProblemKind::Qp
        }) {
            ProblemKind::Qp => {
                let d = a.d.unwrap_or(100);
                let mu = a.mu.unwrap_or(0.05);
                let l = a.l.unwrap_or(20.0);
                if a.qp_file.is_none() && !(mu > 0.0 && mu <= l && l.is_finite()) {
                    return Err(CliError::Usage(format!("--mu {mu} --L {l}: need 0 < mu <= L")));
                }
                ProblemSpec::Qp {
                    d,
                    mu,
                    l,
                    file: a.qp_file.clone(),
                }
            }
            ProblemKind::Logistic => ProblemSpec::Logistic {
                data: a
                    .data
                    .clone()
                    .ok_or_else(|| CliError::Usage("--problem logistic needs --data".into()))?,
            },
        };

        let boost_mu = unit_interval("boost-mu", a.boost_mu.unwrap_or(0.9))?;
        let smooth_name = a.smooth.unwrap_or(pre.smooth);
        // plain momentum on a QP defaults its scale to 1/L, making γ a relative step
        let eps_default = match (&problem, smooth_name) {
            (ProblemSpec::Qp { l, file: None, .. }, SmoothName::None) => 1.0 / l,
            _ => 0.1,
        };
        let boost = match a.boost.unwrap_or(pre.boost) {
            BoostName::None => BoostConfig::None,
            BoostName::Momentum => BoostConfig::Momentum {
                mu: boost_mu,
                eps: positive("boost-eps", a.boost_eps.unwrap_or(eps_default))?,
            },
            BoostName::Nesterov => BoostConfig::Nesterov {
                mu: boost_mu,
                eps: positive("boost-eps", a.boost_eps.unwrap_or(eps_default))?,
            },
            BoostName::Aggregated => BoostConfig::Aggregated,
            BoostName::Saga => BoostConfig::Saga,
        };

        let (beta_default, eps_default) = match smooth_name {
            SmoothName::Amsgrad => (0.99, 1e-6),
            SmoothName::Adadelta => (0.95, 1e-6),
            _ => (0.999, 1e-8),
        };
        let beta = unit_interval("beta", a.beta.unwrap_or(beta_default))?;
        let epsilon = positive("epsilon", a.epsilon.unwrap_or(eps_default))?;
        let smooth = match smooth_name {
            SmoothName::None => SmoothConfig::None,
            SmoothName::Adagrad => SmoothConfig::Adagrad { epsilon },
            SmoothName::Adadelta => SmoothConfig::Adadelta { rho: beta, epsilon },
            SmoothName::Rmsprop => SmoothConfig::Rmsprop { beta, epsilon },
            SmoothName::Amsgrad => SmoothConfig::Amsgrad { beta, epsilon },
        };

        let step = a.step.unwrap_or(pre.step);
        let gamma = a.gamma.unwrap_or(Gamma::Value(1.0));
        let p = a.p.unwrap_or(0.5);
        if !(p.is_finite() && p >= 0.0) {
            return Err(CliError::Usage(format!("--p must be nonnegative, got {p}")));
        }
        let prox = match a.prox.unwrap_or(pre.prox) {
            ProxName::None => ProxConfig::None,
            ProxName::L1 => {
                let lambda1 = a.lambda1.unwrap_or(1e-4);
                if !(lambda1.is_finite() && lambda1 >= 0.0) {
                    return Err(CliError::Usage(format!(
                        "--lambda1 must be nonnegative, got {lambda1}"
                    )));
                }
                ProxConfig::L1 { lambda1 }
            }
        };

        let role = a.role.unwrap_or(Role::Standalone);
        let exec_name = match (a.executor, role) {
            (Some(e), Role::Standalone) => e,
            (None, Role::Standalone) => pre.executor,
            (None | Some(ExecName::Paramserver), _) => ExecName::Paramserver,
            (Some(e), r) => {
                return Err(CliError::Usage(format!(
                    "--role {r:?} runs the paramserver executor, not --executor {e:?}"
                )))
            }
        };
        let workers = a.workers.unwrap_or(1);
        let executor = match exec_name {
            ExecName::Serial => ExecutorKind::Serial,
            ExecName::Consistent => ExecutorKind::Consistent { workers },
            ExecName::Inconsistent => ExecutorKind::Inconsistent { workers },
            ExecName::Paramserver => {
                if role == Role::Standalone {
                    return Err(CliError::Usage(
                        "--executor paramserver needs --role scheduler, master or worker".into(),
                    ));
                }
                ExecutorKind::ParamServer
            }
        };
        proxpol::solver::validate(executor, boost.kind(), smooth.kind(), true).map_err(|e| match e {
            CoreError::IncompatiblePolicies(m) => CliError::Usage(format!("incompatible policies: {m}")),
            other => CliError::Usage(other.to_string()),
        })?;

        let m = a.m.unwrap_or(1);
        if m == 0 {
            return Err(CliError::Usage("--M must be at least 1".into()));
        }
        let sampler = a.sampler.unwrap_or(pre.sampler);
        if sampler == SamplerName::Uniform
            && m > 1
            && matches!(boost, BoostConfig::Aggregated | BoostConfig::Saga)
        {
            return Err(CliError::Usage(format!(
                "incompatible policies: {:?} boosting needs component identities, which uniform batches of --M {m} lack",
                boost.kind()
            )));
        }

        let topology = Topology {
            scheduler: a.scheduler.unwrap_or(IpAddr::V4(Ipv4Addr::LOCALHOST)),
            control_port: a.control_port.unwrap_or(DEFAULT_CONTROL_PORT),
            publish_port: a.publish_port.unwrap_or(DEFAULT_PUBLISH_PORT),
            directory_port: a.directory_port.unwrap_or(DEFAULT_DIRECTORY_PORT),
            masters: a.masters.unwrap_or(DEFAULT_MASTERS),
            master_id: a.master_id,
            master_host: a.master_host.unwrap_or(Ipv4Addr::LOCALHOST),
            master_port: a.master_port.unwrap_or(proxpol_ps::master::DEFAULT_MASTER_PORT),
            worker_id: a.worker_id,
            shard: a.shard.unwrap_or(0),
            shards: a.shards.unwrap_or(1),
            worker_timeout: a
                .worker_timeout_ms
                .map(Duration::from_millis)
                .unwrap_or(proxpol_ps::scheduler::DEFAULT_WORKER_TIMEOUT),
        };
        match role {
            Role::Master if topology.master_id.is_none() => {
                return Err(CliError::Usage("--role master needs --master-id".into()))
            }
            Role::Scheduler | Role::Master if topology.masters == 0 => {
                return Err(CliError::Usage("--masters must be at least 1".into()))
            }
            Role::Worker if topology.shards == 0 || topology.shard >= topology.shards => {
                return Err(CliError::Usage(format!(
                    "--shard {} is out of range for --shards {}",
                    topology.shard, topology.shards
                )))
            }
            _ => {}
        }

        Ok(Self {
            problem,
            boost,
            smooth,
            step,
            gamma,
            p,
            prox,
            executor,
            workers,
            k: a.k.unwrap_or(1000),
            m,
            sampler,
            seed: a.seed.unwrap_or(0),
            out: a.out,
            log_objective: a.log_objective.unwrap_or(false),
            dry_run: a.dry_run.unwrap_or(false),
            role,
            topology,
        })
    }

    /// Settles the step policy given the problem's smoothness constant `l`
    /// for the chosen sampling scope and, for QPs, the strong convexity `mu`.
    pub fn step_config(&self, l: f64, mu: Option<f64>) -> StepConfig {
        let gamma = match self.gamma {
            Gamma::Value(v) => v,
            Gamma::Auto => match (&self.boost, mu) {
                // the momentum scale already carries the 1/L factor on QPs
                (BoostConfig::Momentum { .. } | BoostConfig::Nesterov { .. }, Some(_))
                    if self.smooth == SmoothConfig::None =>
                {
                    1.0
                }
                (_, Some(mu)) => 2.0 / (mu + l),
                // saga directions are averages of per-sample gradients
                (BoostConfig::Saga, None) => 1.0 / (3.0 * 0.25),
                _ => 1.0 / l,
            },
        };
        match self.step {
            StepName::Constant => StepConfig::Constant { gamma },
            StepName::Decreasing => StepConfig::Decreasing {
                gamma0: gamma,
                p: self.p,
            },
        }
    }
}
