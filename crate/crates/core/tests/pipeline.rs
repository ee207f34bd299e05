mod common;

use std::sync::{Arc, Mutex};

use proxpol::boosting::{BoostKind, Boosting};
use proxpol::prelude::*;
use proxpol::problems::QpProblem;
use proxpol::smoothing::SmoothKind;

type Trace = Arc<Mutex<Vec<String>>>;

struct SpyBoost(Trace);
struct SpySmooth(Trace);
struct SpyStep(Trace);
struct SpyProx(Trace);

impl Boosting for SpyBoost {
    fn initialize(&mut self, _dim: usize, _slots: usize) -> Result<()> {
        Ok(())
    }
    fn boost(&mut self, origin: usize, kl: u64, kg: u64, g: &mut [f64]) -> Result<()> {
        self.0
            .lock()
            .unwrap()
            .push(format!("boost({origin},{kl},{kg},{})", g[0]));
        g[0] += 1.0;
        Ok(())
    }
}

impl Smoothing for SpySmooth {
    fn initialize(&mut self, _dim: usize) -> Result<()> {
        Ok(())
    }
    fn smooth(&mut self, kl: u64, kg: u64, _x: &[f64], g: &mut [f64]) -> Result<()> {
        self.0.lock().unwrap().push(format!("smooth({kl},{kg},{})", g[0]));
        g[0] *= 2.0;
        Ok(())
    }
}

impl Step for SpyStep {
    fn step(&self, kl: u64, kg: u64, fval: f64, _x: &[f64], g: &[f64]) -> f64 {
        self.0
            .lock()
            .unwrap()
            .push(format!("step({kl},{kg},{fval},{})", g[0]));
        0.25
    }
}

impl Prox for SpyProx {
    fn apply(&self, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        self.0
            .lock()
            .unwrap()
            .push(format!("prox({gamma},{},{})", x[0], d[0]));
        out[0] = x[0] - gamma * d[0];
        Ok(())
    }
}

#[test]
fn policies_run_in_pipeline_order() {
    let trace: Trace = Arc::default();
    let mut solver = SolverBuilder::new()
        .custom_boosting(Box::new(SpyBoost(trace.clone())))
        .custom_smoothing(Box::new(SpySmooth(trace.clone())))
        .custom_step(Box::new(SpyStep(trace.clone())))
        .custom_prox(Box::new(SpyProx(trace.clone())))
        .build()
        .unwrap();
    solver.initialize(vec![2.0]).unwrap();
    let loss = common::quadratic_half();
    let sampler = Sampler::full_batch(1).unwrap();
    let out = solver.solve(&loss, &sampler, maxiter(2), NullLogger).unwrap();

    // k=0: g=2 → boost 3 → smooth 6 → x = 2 − 0.25·6 = 0.5
    // k=1: g=0.5 → boost 1.5 → smooth 3 → x = 0.5 − 0.75 = −0.25
    let expected = [
        "boost(0,0,0,2)",
        "smooth(0,0,3)",
        "step(0,0,2,6)",
        "prox(0.25,2,6)",
        "boost(0,1,1,0.5)",
        "smooth(1,1,1.5)",
        "step(1,1,0.125,3)",
        "prox(0.25,0.5,3)",
    ];
    assert_eq!(*trace.lock().unwrap(), expected);
    assert_eq!(out.x, vec![-0.25]);
    assert_eq!(out.k, 2);
}

#[test]
fn vanilla_matches_textbook_recursion() {
    let qp = QpProblem::generate(40, 0.1, 10.0, 3).unwrap();
    let gamma = 2.0 / (0.1 + 10.0);
    let x0: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();

    let mut solver = assemble_solver(
        BoostConfig::None,
        SmoothConfig::None,
        StepConfig::Constant { gamma },
        ProxConfig::None,
        ExecutorKind::Serial,
    )
    .unwrap();
    solver.initialize(x0.clone()).unwrap();
    let out = solver
        .solve(&qp, &Sampler::full_batch(1).unwrap(), maxiter(300), NullLogger)
        .unwrap();

    let mut x = x0;
    let mut g = vec![0.0; 40];
    for _ in 0..300 {
        qp.full(&x, &mut g).unwrap();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= gamma * gi;
        }
    }
    assert_eq!(common::bits(&out.x), common::bits(&x));
}

#[test]
fn maxiter_zero_returns_start_point() {
    let mut solver = SolverBuilder::new().build().unwrap();
    solver.initialize(vec![1.5]).unwrap();
    let mut log = VecLogger::new();
    let out = solver
        .solve(
            &common::quadratic_half(),
            &Sampler::full_batch(1).unwrap(),
            maxiter(0),
            &mut log,
        )
        .unwrap();
    assert_eq!(out.x, vec![1.5]);
    assert_eq!(out.k, 0);
    assert!(log.records.is_empty());
}

#[test]
fn unit_step_on_half_square_lands_on_zero() {
    let mut solver = SolverBuilder::new()
        .step(StepConfig::Constant { gamma: 1.0 })
        .build()
        .unwrap();
    solver.initialize(vec![1.0]).unwrap();
    let out = solver
        .solve(
            &common::quadratic_half(),
            &Sampler::full_batch(1).unwrap(),
            maxiter(1),
            NullLogger,
        )
        .unwrap();
    assert_eq!(out.x, vec![0.0]);
}

#[test]
fn half_step_halves_each_iterate() {
    let mut solver = SolverBuilder::new()
        .step(StepConfig::Constant { gamma: 0.5 })
        .build()
        .unwrap();
    solver.initialize(vec![2.0]).unwrap();
    let mut log = VecLogger::with_decisions();
    solver
        .solve(
            &common::quadratic_half(),
            &Sampler::full_batch(1).unwrap(),
            maxiter(4),
            &mut log,
        )
        .unwrap();
    let xs: Vec<f64> = log.records.iter().map(|r| r.x.as_ref().unwrap()[0]).collect();
    assert_eq!(xs, vec![1.0, 0.5, 0.25, 0.125]);
    let fvals = log.fvals();
    assert_eq!(fvals, vec![2.0, 0.5, 0.125, 0.03125]);
}

#[test]
fn adam_logs_one_record_per_iterate() {
    let mut adam = assemble_solver(
        BoostConfig::Momentum { mu: 0.9, eps: 0.1 },
        SmoothConfig::Rmsprop {
            beta: 0.999,
            epsilon: 1e-8,
        },
        StepConfig::Constant { gamma: 0.01 },
        ProxConfig::None,
        ExecutorKind::Serial,
    )
    .unwrap();
    adam.initialize(vec![0.3; 10]).unwrap();
    let loss = common::small_logistic(50, 10, 0.5, 1);
    let sampler = Sampler::uniform(50, 5, 9).unwrap();
    let mut log = VecLogger::new();
    adam.solve(&loss, &sampler, maxiter(37), &mut log).unwrap();
    assert_eq!(log.records.len(), 37);
    for (i, r) in log.records.iter().enumerate() {
        assert_eq!(r.k, i as u64);
    }
    assert!(log.records.windows(2).all(|w| w[0].t_ns <= w[1].t_ns));
}

#[test]
fn seeded_runs_are_bit_identical() {
    let loss = common::small_logistic(200, 30, 0.2, 4);
    let run = || {
        let mut s = assemble_solver(
            BoostConfig::Saga,
            SmoothConfig::None,
            StepConfig::Constant { gamma: 0.5 },
            ProxConfig::L1 { lambda1: 1e-3 },
            ExecutorKind::Serial,
        )
        .unwrap();
        s.initialize(vec![0.0; 30]).unwrap();
        let mut log = VecLogger::new();
        let out = s
            .solve(
                &loss,
                &Sampler::uniform(200, 1, 77).unwrap(),
                maxiter(500),
                &mut log,
            )
            .unwrap();
        (common::bits(&log.fvals()), common::bits(&out.x))
    };
    assert_eq!(run(), run());
}

#[test]
fn second_solve_resumes_from_global_k() {
    let loss = common::small_logistic(40, 8, 0.5, 2);
    let sampler = Sampler::uniform(40, 4, 5).unwrap();
    let build = || {
        let mut s = SolverBuilder::new()
            .boosting(BoostConfig::Momentum { mu: 0.9, eps: 0.1 })
            .step(StepConfig::Constant { gamma: 0.05 })
            .build()
            .unwrap();
        s.initialize(vec![0.0; 8]).unwrap();
        s
    };
    let mut once = build();
    let whole = once.solve(&loss, &sampler, maxiter(20), NullLogger).unwrap();

    // the terminator sees the global k, so a second call continues to 20
    let mut twice = build();
    twice.solve(&loss, &sampler, maxiter(10), NullLogger).unwrap();
    let mid = twice.state().unwrap().clone();
    assert_eq!(mid.k, 10);
    assert_ne!(mid.x, whole.x);
    let mut log = VecLogger::new();
    let end = twice.solve(&loss, &sampler, maxiter(20), &mut log).unwrap();
    assert_eq!(end.k, 20);
    assert_eq!(log.records.first().map(|r| r.k), Some(10));
    assert_eq!(log.records.len(), 10);
}

#[test]
fn table_boosting_needs_component_identity() {
    for boost in [BoostConfig::Aggregated, BoostConfig::Saga] {
        let mut s = SolverBuilder::new().boosting(boost).build().unwrap();
        s.initialize(vec![0.0; 5]).unwrap();
        let loss = common::small_logistic(20, 5, 0.5, 0);
        let err = s
            .solve(
                &loss,
                &Sampler::uniform(20, 4, 0).unwrap(),
                maxiter(1),
                NullLogger,
            )
            .unwrap_err();
        assert!(matches!(err, Error::IncompatiblePolicies(_)), "{err}");
        // full batch is treated as component 0, cyclic blocks carry identities
        s.solve(&loss, &Sampler::full_batch(20).unwrap(), maxiter(1), NullLogger)
            .unwrap();
        s.solve(&loss, &Sampler::cyclic(20, 4).unwrap(), maxiter(3), NullLogger)
            .unwrap();
    }
}

#[test]
fn inconsistent_executor_legality() {
    let inc = ExecutorKind::Inconsistent { workers: 2 };
    let ok = [
        (BoostConfig::None, ProxConfig::None),
        (BoostConfig::Saga, ProxConfig::L1 { lambda1: 0.1 }),
    ];
    for (b, p) in ok {
        assert!(assemble_solver(b, SmoothConfig::None, StepConfig::default(), p, inc).is_ok());
    }
    let err = assemble_solver(
        BoostConfig::Momentum { mu: 0.9, eps: 0.1 },
        SmoothConfig::None,
        StepConfig::default(),
        ProxConfig::None,
        inc,
    )
    .unwrap_err();
    assert!(matches!(err, Error::IncompatiblePolicies(_)));

    // a prox without a coordinate form is refused
    struct Dense;
    impl Prox for Dense {
        fn apply(&self, gamma: f64, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
            for i in 0..x.len() {
                out[i] = x[i] - gamma * d[i];
            }
            Ok(())
        }
    }
    let err = SolverBuilder::new()
        .custom_prox(Box::new(Dense))
        .executor(inc)
        .build()
        .unwrap_err();
    assert!(matches!(err, Error::IncompatiblePolicies(_)));
    assert!(proxpol::solver::validate(inc, BoostKind::None, SmoothKind::Adagrad, true).is_err());
    assert!(SolverBuilder::new()
        .executor(ExecutorKind::Consistent { workers: 0 })
        .build()
        .is_err());
}

#[test]
fn divergence_is_reported() {
    let mut s = SolverBuilder::new()
        .step(StepConfig::Constant { gamma: 1e200 })
        .build()
        .unwrap();
    s.initialize(vec![1.0]).unwrap();
    let loss = FnLoss::new(1, |x: &[f64], g: &mut [f64]| {
        g[0] = 1e200 * x[0];
        0.5e200 * x[0] * x[0]
    });
    let err = s
        .solve(&loss, &Sampler::full_batch(1).unwrap(), maxiter(10), NullLogger)
        .unwrap_err();
    assert!(matches!(err, Error::DivergenceDetected { .. }), "{err}");

    let mut quiet = SolverBuilder::new()
        .step(StepConfig::Constant { gamma: 1e200 })
        .check_divergence(false)
        .build()
        .unwrap();
    quiet.initialize(vec![1.0]).unwrap();
    let out = quiet
        .solve(&loss, &Sampler::full_batch(1).unwrap(), maxiter(3), NullLogger)
        .unwrap();
    assert!(!out.x[0].is_finite());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let mut s = SolverBuilder::new().build().unwrap();
    s.initialize(vec![0.0; 3]).unwrap();
    let err = s
        .solve(
            &common::quadratic_half(),
            &Sampler::full_batch(1).unwrap(),
            maxiter(1),
            NullLogger,
        )
        .unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 1 }));
    assert!(SolverBuilder::new().build().unwrap().initialize(vec![]).is_err());
}

#[test]
fn independent_solvers_do_not_share_state() {
    let loss = common::small_logistic(30, 6, 0.5, 8);
    let sampler = Sampler::uniform(30, 1, 1).unwrap();
    let mk = || {
        let mut s = assemble_solver(
            BoostConfig::Saga,
            SmoothConfig::Amsgrad {
                beta: 0.99,
                epsilon: 1e-6,
            },
            StepConfig::Constant { gamma: 0.01 },
            ProxConfig::None,
            ExecutorKind::Serial,
        )
        .unwrap();
        s.initialize(vec![0.1; 6]).unwrap();
        s
    };
    let mut a = mk();
    let mut b = mk();
    let before = b.state().unwrap().clone();
    a.solve(&loss, &sampler, maxiter(50), NullLogger).unwrap();
    assert_eq!(b.state().unwrap(), &before);
    let rb = b.solve(&loss, &sampler, maxiter(50), NullLogger).unwrap();
    let ra = a.state().unwrap();
    assert_eq!(common::bits(&ra.x), common::bits(&rb.x));
}
