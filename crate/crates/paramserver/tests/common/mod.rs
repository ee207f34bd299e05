#![allow(dead_code)]

use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use proxpol::boosting::BoostConfig;
use proxpol::problems::{LogisticLoss, SyntheticLogistic};
use proxpol::prox::ProxConfig;
use proxpol::smoothing::SmoothConfig;
use proxpol::step::StepConfig;
use proxpol::Policies;
use proxpol_ps::codec::{read_message, write_message};
use proxpol_ps::{
    run_master, MasterConfig, MasterInfo, MasterReport, Message, Result, Scheduler, SchedulerAddrs,
    SchedulerConfig, SchedulerReport,
};

pub fn piag(gamma: f64, lambda1: f64) -> Policies {
    Policies::new(
        BoostConfig::Aggregated,
        SmoothConfig::None,
        StepConfig::Constant { gamma },
        ProxConfig::L1 { lambda1 },
    )
}

pub fn plain(gamma: f64) -> Policies {
    Policies::new(
        BoostConfig::None,
        SmoothConfig::None,
        StepConfig::Constant { gamma },
        ProxConfig::None,
    )
}

pub fn logistic(n: usize, d: usize, density: f64, seed: u64) -> proxpol::problems::SparseDataset {
    SyntheticLogistic::new(n, d, density, seed).generate().unwrap()
}

/// `Σ log(1 + e^{−b⟨a,x⟩}) + λ₁‖x‖₁`
pub fn objective(loss: &LogisticLoss, lambda1: f64, x: &[f64]) -> f64 {
    loss.value(x) + lambda1 * x.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn spawn_scheduler(
    masters: usize,
    dim: usize,
    max_updates: u64,
    timeout: Option<Duration>,
) -> (SchedulerAddrs, JoinHandle<Result<SchedulerReport>>) {
    let mut cfg = SchedulerConfig::new(masters, dim, max_updates).ephemeral();
    if let Some(t) = timeout {
        cfg.worker_timeout = t;
    }
    let s = Scheduler::bind(cfg).unwrap();
    let addrs = s.addrs();
    (addrs, thread::spawn(move || s.run()))
}

pub fn spawn_master(
    id: u32,
    addrs: &SchedulerAddrs,
    x0: Vec<f64>,
    max_updates: u64,
    policies: Policies,
) -> JoinHandle<Result<MasterReport>> {
    let mut cfg = MasterConfig::new(id, addrs.control, x0);
    cfg.bind.set_port(0);
    cfg.max_updates = Some(max_updates);
    thread::spawn(move || run_master(cfg, policies))
}

/// Asks the directory until `expected` masters have registered.
pub fn lookup(addrs: &SchedulerAddrs, coords: Vec<u32>, expected: usize) -> Vec<MasterInfo> {
    let mut s = TcpStream::connect(addrs.directory).unwrap();
    for _ in 0..500 {
        write_message(&mut s, &Message::RequestMasters { coords: vec![] }).unwrap();
        match read_message(&mut s).unwrap() {
            Message::MasterList { masters } if masters.len() >= expected => break,
            Message::MasterList { .. } => thread::sleep(Duration::from_millis(10)),
            other => panic!("unexpected {other:?}"),
        }
    }
    write_message(&mut s, &Message::RequestMasters { coords }).unwrap();
    match read_message(&mut s).unwrap() {
        Message::MasterList { mut masters } => {
            masters.sort_by_key(|m| m.id);
            masters
        }
        other => panic!("unexpected {other:?}"),
    }
}

/// A hand-driven worker connection to one master.
pub struct Client {
    pub info: MasterInfo,
    stream: TcpStream,
}

impl Client {
    pub fn connect(info: MasterInfo) -> Self {
        let addr = SocketAddrV4::new(Ipv4Addr::from(info.ip), info.port as u16);
        let stream = TcpStream::connect(SocketAddr::V4(addr)).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Self { info, stream }
    }

    pub fn send(&mut self, m: &Message) {
        write_message(&mut self.stream, m).unwrap();
    }

    pub fn recv(&mut self) -> Message {
        read_message(&mut self.stream).unwrap()
    }

    /// `(k, lo, values)`
    pub fn pull(&mut self, worker_id: u32) -> (u64, u32, Vec<f64>) {
        self.send(&Message::Pull { worker_id });
        match self.recv() {
            Message::XSegment { k, lo, values } => (k, lo, values),
            other => panic!("unexpected {other:?}"),
        }
    }

    pub fn push(&mut self, worker_id: u32, k_read: u64, entries: Vec<(u32, f64)>) {
        self.send(&Message::Push {
            worker_id,
            k_read,
            entries,
        });
        assert_eq!(self.recv(), Message::Ack { progress: None });
    }

    /// True once the master has closed this connection.
    pub fn closed(&mut self) -> bool {
        use std::io::Read;
        matches!(self.stream.read(&mut [0u8; 1]), Ok(0) | Err(_))
    }

    /// Empty pushes until the master has applied `k` updates. The last
    /// one may end the run, so nothing is read after it but its ACK.
    pub fn drain_to(&mut self, k: u64) {
        let (cur, _, _) = self.pull(u32::MAX - 1);
        for kr in cur..k {
            self.push(0, kr, vec![]);
        }
    }
}
