//! `run`: standalone solves and the three parameter-server roles.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;

use proxpol::boosting::BoostConfig;
use proxpol::prox::ProxConfig;
use proxpol::step::StepConfig;
use proxpol::{maxiter, CsvLogger, Policies, Sampler, SolverBuilder};
use proxpol_ps::{
    run_master, run_worker, MasterConfig, Scheduler, SchedulerConfig, SchedulerPorts, WorkerConfig,
};

use crate::config::{Role, RunConfig, SamplerName};
use crate::error::CliError;
use crate::problem::{ObjectiveLogger, Problem};

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let role = match cfg.role {
        Role::Standalone => "standalone",
        Role::Scheduler => "scheduler",
        Role::Master => "master",
        Role::Worker => "worker",
    };
    let result = match cfg.role {
        Role::Standalone => standalone(cfg),
        Role::Scheduler => scheduler(cfg),
        Role::Master => master(cfg),
        Role::Worker => worker(cfg),
    };
    result.map_err(|e| e.context(role))
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write + Send>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Components per batch, which is also the smoothness scope for `auto`.
fn sampler(cfg: &RunConfig, n: usize, seed: u64) -> Result<(Sampler, usize), CliError> {
    let m = cfg.m.min(n);
    Ok(match cfg.sampler {
        _ if n == 1 => (Sampler::full_batch(1)?, 1),
        SamplerName::Full => (Sampler::full_batch(n)?, n),
        SamplerName::Uniform => (Sampler::uniform(n, m, seed)?, m),
        // aggregated tables cover every block, so the whole sum is in scope
        SamplerName::Cyclic if cfg.boost == BoostConfig::Aggregated => (Sampler::cyclic(n, m)?, n),
        SamplerName::Cyclic => (Sampler::cyclic(n, m)?, m),
    })
}

fn describe(cfg: &RunConfig, problem: &Problem, step: &StepConfig, sampler: &Sampler) -> io::Result<()> {
    let kind = match problem {
        Problem::Qp(_) => "qp",
        Problem::Logistic(_) => "logistic",
    };
    let mut o = io::stdout().lock();
    writeln!(
        o,
        "problem: {kind} (d={}, N={})",
        problem.dim(),
        problem.n_components()
    )?;
    writeln!(o, "boosting: {:?}", cfg.boost)?;
    writeln!(o, "smoothing: {:?}", cfg.smooth)?;
    writeln!(o, "step: {step:?}")?;
    writeln!(o, "prox: {:?}", cfg.prox)?;
    writeln!(o, "executor: {:?}", cfg.executor)?;
    writeln!(
        o,
        "sampler: {:?} (M={}, N={})",
        sampler.kind(),
        sampler.batch_size(),
        sampler.n_components()
    )?;
    writeln!(o, "K: {}", cfg.k)?;
    writeln!(o, "seed: {}", cfg.seed)
}

fn standalone(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = Problem::load(&cfg.problem, cfg.seed)?;
    let (sampler, scope) = sampler(cfg, problem.n_components(), cfg.seed)?;
    let step = cfg.step_config(problem.smoothness(scope), problem.mu());
    if cfg.dry_run {
        // a closed pipe just ends the output
        let _ = describe(cfg, &problem, &step, &sampler);
        return Ok(());
    }
    let mut solver = SolverBuilder::new()
        .boosting(cfg.boost)
        .smoothing(cfg.smooth)
        .step(step)
        .prox(cfg.prox)
        .executor(cfg.executor)
        .build()?;
    solver.initialize(problem.x0(cfg.seed))?;

    // the gap is only meaningful against the unregularized minimum
    let f_star = match cfg.prox {
        ProxConfig::None => problem.f_star(),
        ProxConfig::L1 { .. } => None,
    };
    let mut csv = CsvLogger::new(output(cfg)?, f_star)?;
    let solved = if cfg.log_objective {
        let logger = ObjectiveLogger {
            inner: &mut csv,
            problem: &problem,
            prox: cfg.prox,
        };
        solver.solve(problem.loss(), &sampler, maxiter(cfg.k), logger)
    } else {
        solver.solve(problem.loss(), &sampler, maxiter(cfg.k), &mut csv)
    };
    // keep whatever was logged before a divergence
    let flushed = csv.finish();
    solved?;
    flushed?;
    Ok(())
}

fn addr(cfg: &RunConfig, port: u16) -> SocketAddr {
    SocketAddr::new(cfg.topology.scheduler, port)
}

fn scheduler(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = Problem::load(&cfg.problem, cfg.seed)?;
    let t = &cfg.topology;
    let mut sc = SchedulerConfig::new(t.masters, problem.dim(), cfg.k);
    sc.ip = t.scheduler;
    sc.ports = SchedulerPorts {
        control: t.control_port,
        publish: t.publish_port,
        directory: t.directory_port,
    };
    sc.worker_timeout = t.worker_timeout;
    let report = Scheduler::bind(sc)?.run()?;
    let mut out = output(cfg)?;
    writeln!(out, "master,lo,hi,updates")?;
    for (m, n) in report.masters.iter().zip(&report.progress) {
        writeln!(out, "{},{},{},{}", m.id, m.lo, m.hi, n)?;
    }
    out.flush()?;
    eprintln!(
        "scheduler: done; workers seen {:?}, evicted {:?}",
        report.workers_seen, report.evicted
    );
    Ok(())
}

/// Policies for one master shard. `auto` uses the smoothness of the whole
/// data set, since each master aggregates every worker's share.
fn master_policies(cfg: &RunConfig, problem: &Problem) -> Policies {
    let step = cfg.step_config(problem.smoothness(problem.n_components()), problem.mu());
    Policies::new(cfg.boost, cfg.smooth, step, cfg.prox)
}

fn master(cfg: &RunConfig) -> Result<(), CliError> {
    let problem = Problem::load(&cfg.problem, cfg.seed)?;
    let t = &cfg.topology;
    let id = t.master_id.expect("validated");
    let mut mc = MasterConfig::new(id, addr(cfg, t.control_port), problem.x0(cfg.seed));
    mc.bind = SocketAddr::new(t.master_host.into(), t.master_port);
    mc.advertise = Some(t.master_host);
    mc.max_updates = Some(cfg.k);
    mc.slots = mc.slots.max(cfg.workers);
    let report = run_master(mc, master_policies(cfg, &problem))?;
    let mut out = output(cfg)?;
    writeln!(out, "index,value")?;
    for (j, v) in report.x.iter().enumerate() {
        writeln!(out, "{},{:?}", report.lo + j, v)?;
    }
    out.flush()?;
    eprintln!(
        "master {id}: applied {} updates to [{}, {})",
        report.k, report.lo, report.hi
    );
    for e in &report.errors {
        eprintln!("master {id}: dropped a connection: {e}");
    }
    Ok(())
}

fn worker(cfg: &RunConfig) -> Result<(), CliError> {
    let t = &cfg.topology;
    let problem = Problem::load(&cfg.problem, cfg.seed)?.shard(t.shard, t.shards)?;
    let n = problem.n_components();
    // every worker's slot holds its whole shard gradient unless it samples
    let sampler = match cfg.sampler {
        SamplerName::Uniform if n > 1 => Sampler::uniform(n, cfg.m.min(n), cfg.seed)?.fork(t.shard),
        _ => Sampler::full_batch(n)?,
    };
    let mut wc = WorkerConfig::new(addr(cfg, t.publish_port), addr(cfg, t.directory_port));
    wc.worker_id = t.worker_id;
    let mut csv = CsvLogger::new(output(cfg)?, None)?;
    let report = run_worker(&wc, problem.loss(), &sampler, &mut csv);
    let flushed = csv.finish();
    let report = report?;
    flushed?;
    eprintln!("worker {}: {} rounds", report.worker_id, report.rounds);
    Ok(())
}
