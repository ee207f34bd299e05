use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use proxpol::problems::read_libsvm;

fn proxpol() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxpol"))
}

fn run(args: &[&str]) -> Output {
    proxpol().args(args).output().unwrap()
}

struct Csv {
    header: String,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().to_string();
        let rows = lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Csv { header, rows }
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    fn ks(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r[0].parse().unwrap()).collect()
    }
}

fn csv_of(out: &Output) -> Csv {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Csv::parse(&String::from_utf8(out.stdout.clone()).unwrap())
}

#[test]
fn zero_budget_writes_only_the_header() {
    let out = run(&["run", "--K", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "k,t_ns,fval,gap\n");
}

#[test]
fn gradient_descent_gap_is_monotone() {
    let c = csv_of(&run(&[
        "run",
        "--problem",
        "qp",
        "--d",
        "100",
        "--mu",
        "0.05",
        "--L",
        "20",
        "--algo",
        "gd",
        "--gamma",
        "auto",
        "--K",
        "2500",
    ]));
    assert_eq!(c.header, "k,t_ns,fval,gap");
    assert_eq!(c.rows.len(), 2500);
    assert_eq!(c.ks(), (0..2500).collect::<Vec<_>>());
    let gap = c.column(3);
    assert!(gap.windows(2).all(|w| w[1] <= w[0]));
    assert!(gap[2499] < 1e-3 * gap[0]);
    let t = c.column(1);
    assert!(t.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn identical_configs_give_identical_values() {
    let args = [
        "run", "--algo", "nadam", "--gamma", "0.05", "--K", "200", "--seed", "4",
    ];
    let a = csv_of(&run(&args));
    let b = csv_of(&run(&args));
    assert_eq!(a.column(2), b.column(2));
    let c = csv_of(&run(&[
        "run", "--algo", "nadam", "--gamma", "0.05", "--K", "200", "--seed", "5",
    ]));
    assert_ne!(a.column(2), c.column(2));
}

#[test]
fn dry_run_reports_the_assembled_policies() {
    let out = run(&["run", "--algo", "adam", "--dry-run"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("boosting: Momentum { mu: 0.9, eps: 0.1 }"),
        "{text}"
    );
    assert!(text.contains("smoothing: Rmsprop { beta: 0.999, epsilon: 1e-8 }"));
    assert!(text.contains("step: Constant { gamma: 1.0 }"));
    assert!(text.contains("prox: None"));

    let out = run(&[
        "run",
        "--problem",
        "qp",
        "--mu",
        "0.05",
        "--L",
        "20",
        "--gamma",
        "auto",
        "--dry-run",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(&format!("gamma: {:?}", 2.0 / 20.05)), "{text}");
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(
        code(&[
            "run",
            "--executor",
            "inconsistent",
            "--prox",
            "none",
            "--boost",
            "momentum"
        ]),
        Some(2)
    );
    assert_eq!(code(&["run", "--no-such-flag"]), Some(2));
    assert_eq!(code(&["run", "--executor", "paramserver"]), Some(2));
    // γ = 1 on a QP with L = 20 blows up
    let out = run(&["run", "--algo", "gd", "--K", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
    // no scheduler listening
    let port = free_port();
    let out = run(&[
        "run",
        "--role",
        "master",
        "--master-id",
        "0",
        "--control-port",
        &port.to_string(),
        "--d",
        "4",
        "--master-port",
        "0",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "algo = \"gd\"\ngamma = \"auto\"\nK = 40\nd = 20\n").unwrap();
    let c = csv_of(&run(&["run", "--config", cfg.to_str().unwrap()]));
    assert_eq!(c.rows.len(), 40);
    let c = csv_of(&run(&["run", "--config", cfg.to_str().unwrap(), "--K", "7"]));
    assert_eq!(c.rows.len(), 7);
    std::fs::write(&cfg, "K = 3\nunknown-key = 1\n").unwrap();
    assert_eq!(
        run(&["run", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn output_file_and_objective_logging() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.svm");
    let out = dir.path().join("o.csv");
    assert!(run(&[
        "generate-dataset",
        "--N",
        "200",
        "--d",
        "20",
        "--density",
        "0.2",
        "--out",
        data.to_str().unwrap()
    ])
    .status
    .success());
    let args = [
        "run",
        "--data",
        data.to_str().unwrap(),
        "--algo",
        "saga",
        "--gamma",
        "auto",
        "--K",
        "400",
        "--log-objective",
        "--out",
        out.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let c = Csv::parse(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(c.header, "k,t_ns,fval");
    let f = c.column(2);
    assert_eq!(f.len(), 400);
    assert!(f[399] < 0.9 * 200.0 * 2f64.ln(), "{}", f[399]);
}

#[test]
fn qp_parameter_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let qp = dir.path().join("p.qp");
    assert!(run(&[
        "generate-qp",
        "--d",
        "30",
        "--mu",
        "0.1",
        "--L",
        "10",
        "--seed",
        "3",
        "--out",
        qp.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(std::fs::metadata(&qp).unwrap().len(), 38);
    let base = [
        "run", "--algo", "gd", "--gamma", "0.1", "--K", "20", "--seed", "3",
    ];
    let a = csv_of(&run(
        &[&base[..], &["--d", "30", "--mu", "0.1", "--L", "10"]].concat()
    ));
    let b = csv_of(&run(&[&base[..], &["--qp-file", qp.to_str().unwrap()]].concat()));
    assert_eq!(a.column(2), b.column(2));
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let p = dir.join(name);
    let out = run(&[&["generate-dataset", "--out", p.to_str().unwrap()], args].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(p).unwrap()
}

#[test]
fn generated_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let small = generate(dir.path(), "a", &["--N", "4", "--d", "3", "--density", "1"]);
    let text = String::from_utf8(small).unwrap();
    assert_eq!(text.lines().count(), 4);
    let ds = read_libsvm(dir.path().join("a")).unwrap();
    assert_eq!((ds.n_samples(), ds.n_features(), ds.nnz()), (4, 3, 12));

    let x = generate(dir.path(), "b", &["--N", "300", "--d", "50", "--seed", "8"]);
    let y = generate(dir.path(), "c", &["--N", "300", "--d", "50", "--seed", "8"]);
    assert_eq!(x, y);

    let n = 2000;
    generate(
        dir.path(),
        "e",
        &[
            "--N",
            &n.to_string(),
            "--d",
            "200",
            "--density",
            "0.05",
            "--seed",
            "2",
        ],
    );
    let ds = read_libsvm(dir.path().join("e")).unwrap();
    let mean = ds.nnz() as f64 / n as f64;
    // the row mean of Binomial(200, 0.05) has standard deviation sqrt(9.5 / N)
    let sigma = (200.0 * 0.05 * 0.95 / n as f64).sqrt();
    assert!((mean - 10.0).abs() <= 3.0 * sigma, "{mean}");

    assert_eq!(
        run(&[
            "generate-dataset",
            "--density",
            "0",
            "--out",
            dir.path().join("f").to_str().unwrap()
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn larger_batches_reach_a_loss_level_sooner() {
    let dir = tempfile::tempdir().unwrap();
    generate(
        dir.path(),
        "d.svm",
        &["--N", "1000", "--d", "200", "--density", "0.05", "--seed", "1"],
    );
    let data = dir.path().join("d.svm");
    let first_below = |m: usize, threshold: f64| {
        let c = csv_of(&run(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--algo",
            "amsgrad",
            "--beta",
            "0.999",
            "--epsilon",
            "1e-8",
            "--prox",
            "l1",
            "--lambda1",
            "1e-4",
            "--gamma",
            &(0.01 * m as f64 / 1000.0).to_string(),
            "--M",
            &m.to_string(),
            "--K",
            "600",
            "--log-objective",
        ]));
        c.column(2).iter().position(|&f| f <= threshold)
    };
    let threshold = 0.65 * 1000.0 * 2f64.ln();
    let small = first_below(250, threshold).expect("M=250 reaches the level");
    let large = first_below(1000, threshold).expect("M=1000 reaches the level");
    assert!(large < small, "M=1000 took {large}, M=250 took {small}");
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

struct Killer(Vec<Child>);

impl Drop for Killer {
    fn drop(&mut self) {
        for c in &mut self.0 {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

#[test]
fn parameter_server_roles_as_processes() {
    let dir = tempfile::tempdir().unwrap();
    generate(
        dir.path(),
        "d.svm",
        &["--N", "600", "--d", "60", "--density", "0.1", "--seed", "4"],
    );
    let data = dir.path().join("d.svm");
    let ports: Vec<String> = (0..3).map(|_| free_port().to_string()).collect();
    let common = [
        "run",
        "--data",
        data.to_str().unwrap(),
        "--algo",
        "piag",
        "--gamma",
        "auto",
        "--K",
        "1500",
        "--control-port",
        &ports[0],
        "--publish-port",
        &ports[1],
        "--directory-port",
        &ports[2],
    ];
    let spawn = |extra: &[&str], out: &str| {
        proxpol()
            .args(common)
            .args(extra)
            .args(["--out", dir.path().join(out).to_str().unwrap()])
            .stderr(Stdio::piped())
            .spawn()
            .unwrap()
    };
    let t = Instant::now();
    let mut procs = Killer(vec![spawn(&["--role", "scheduler", "--masters", "2"], "s.csv")]);
    for id in ["0", "1"] {
        procs.0.push(spawn(
            &[
                "--role",
                "master",
                "--master-id",
                id,
                "--master-port",
                "0",
                "--workers",
                "3",
            ],
            &format!("m{id}.csv"),
        ));
    }
    for i in ["0", "1", "2"] {
        procs.0.push(spawn(
            &[
                "--role",
                "worker",
                "--shard",
                i,
                "--shards",
                "3",
                "--worker-id",
                i,
            ],
            &format!("w{i}.csv"),
        ));
    }
    for c in &mut procs.0 {
        let status = loop {
            if let Some(s) = c.try_wait().unwrap() {
                break s;
            }
            assert!(t.elapsed() < Duration::from_secs(60), "roles did not finish");
            std::thread::sleep(Duration::from_millis(20));
        };
        assert!(status.success());
    }

    let sched = Csv::parse(&std::fs::read_to_string(dir.path().join("s.csv")).unwrap());
    assert_eq!(sched.header, "master,lo,hi,updates");
    assert_eq!(
        sched.rows,
        vec![vec!["0", "0", "30", "1500"], vec!["1", "30", "60", "1500"]]
    );
    let mut x = Vec::new();
    for id in 0..2 {
        let m = Csv::parse(&std::fs::read_to_string(dir.path().join(format!("m{id}.csv"))).unwrap());
        assert_eq!(m.header, "index,value");
        x.extend(m.column(1));
    }
    assert_eq!(x.len(), 60);
    let loss = proxpol::problems::LogisticLoss::new(read_libsvm(&data).unwrap());
    assert!(loss.value(&x) < 0.8 * 600.0 * 2f64.ln());
    let rounds: usize = (0..3)
        .map(|i| {
            Csv::parse(&std::fs::read_to_string(dir.path().join(format!("w{i}.csv"))).unwrap())
                .rows
                .len()
        })
        .sum();
    assert!(rounds >= 1500);
}
