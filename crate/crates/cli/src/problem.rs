//! The benchmark problems as seen by the harness.

use std::fs::File;
use std::io::BufReader;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use proxpol::partition::balanced_ranges;
use proxpol::problems::{read_libsvm, LogisticLoss, QpProblem};
use proxpol::prox::ProxConfig;
use proxpol::{IterationRecord, Logger, Loss};

use crate::config::ProblemSpec;
use crate::error::CliError;

pub enum Problem {
    Qp(QpProblem),
    Logistic(LogisticLoss),
}

impl Problem {
    pub fn load(spec: &ProblemSpec, seed: u64) -> Result<Self, CliError> {
        match spec {
            ProblemSpec::Qp { file: Some(path), .. } => {
                let f = File::open(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
                Ok(Problem::Qp(QpProblem::read_params(BufReader::new(f))?))
            }
            ProblemSpec::Qp { d, mu, l, file: None } => {
                Ok(Problem::Qp(QpProblem::generate(*d, *mu, *l, seed)?))
            }
            ProblemSpec::Logistic { data } => {
                let ds =
                    read_libsvm(data).map_err(|e| CliError::Other(format!("{}: {e}", data.display())))?;
                Ok(Problem::Logistic(LogisticLoss::new(ds)))
            }
        }
    }

    pub fn loss(&self) -> &(dyn Loss + Send) {
        match self {
            Problem::Qp(p) => p,
            Problem::Logistic(l) => l,
        }
    }

    pub fn dim(&self) -> usize {
        self.loss().dim()
    }

    pub fn n_components(&self) -> usize {
        self.loss().n_components()
    }

    /// QP starts are i.i.d. N(5, 3²); logistic runs start at the origin.
    pub fn x0(&self, seed: u64) -> Vec<f64> {
        match self {
            Problem::Qp(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                let normal = Normal::new(5.0, 3.0).expect("valid normal");
                (0..p.dim()).map(|_| normal.sample(&mut rng)).collect()
            }
            Problem::Logistic(l) => vec![0.0; l.dim()],
        }
    }

    pub fn f_star(&self) -> Option<f64> {
        match self {
            Problem::Qp(p) => Some(p.f_star()),
            Problem::Logistic(_) => None,
        }
    }

    /// Strong convexity modulus, when known.
    pub fn mu(&self) -> Option<f64> {
        match self {
            Problem::Qp(p) => Some(p.mu()),
            Problem::Logistic(_) => None,
        }
    }

    /// Smoothness constant of the loss restricted to `scope` components.
    pub fn smoothness(&self, scope: usize) -> f64 {
        match self {
            Problem::Qp(p) => p.l(),
            Problem::Logistic(_) => LogisticLoss::lipschitz_bound(scope),
        }
    }

    pub fn objective(&self, x: &[f64], prox: &ProxConfig) -> f64 {
        let f = match self {
            Problem::Qp(p) => p.value(x),
            Problem::Logistic(l) => l.value(x),
        };
        f + prox.regularizer(x)
    }

    /// Part `i` of `n` balanced sample shards. A QP has a single component
    /// and cannot be split.
    pub fn shard(self, i: usize, n: usize) -> Result<Self, CliError> {
        if n == 1 {
            return Ok(self);
        }
        match self {
            Problem::Qp(_) => Err(CliError::Usage(format!(
                "--shards {n}: a QP has a single component"
            ))),
            Problem::Logistic(l) => {
                let rows = l.dataset().n_samples();
                if n > rows {
                    return Err(CliError::Usage(format!(
                        "--shards {n} exceeds the {rows} samples"
                    )));
                }
                let range = balanced_ranges(rows, n)[i].clone();
                Ok(Problem::Logistic(LogisticLoss::new(l.dataset().slice(range))))
            }
        }
    }
}

/// Replaces each record's value with the full composite objective at the
/// iterate it produced.
pub struct ObjectiveLogger<'a, G> {
    pub inner: G,
    pub problem: &'a Problem,
    pub prox: ProxConfig,
}

impl<G: Logger> Logger for ObjectiveLogger<'_, G> {
    fn log(&mut self, mut r: IterationRecord) {
        if let Some(x) = r.x.take() {
            r.fval = self.problem.objective(&x, &self.prox);
        }
        self.inner.log(r);
    }

    fn wants_x(&self) -> bool {
        true
    }
}
