//! A master owns one contiguous shard of the decision vector and runs the
//! policy pipeline on it for every push it receives.

use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use proxpol::{IterationRecord, Policies};

use crate::codec::{read_message, write_message, Message};
use crate::net::{accept_loop, bind, connect_retry, wait_readable};
use crate::{PsError, Result};

pub const DEFAULT_MASTER_PORT: u16 = 50000;

/// Masters report their update count to the scheduler this often.
pub const REPORT_EVERY: u64 = 64;

#[derive(Debug, Clone)]
pub struct MasterConfig {
    pub master_id: u32,
    pub bind: SocketAddr,
    /// Address workers should dial; defaults to the bound address, with an
    /// unspecified bind IP advertised as loopback.
    pub advertise: Option<Ipv4Addr>,
    pub scheduler: SocketAddr,
    /// Full-length starting point; the master keeps its own range.
    pub x0: Vec<f64>,
    /// Updates applied before further pushes are acknowledged and dropped.
    pub max_updates: Option<u64>,
    /// Size of per-origin tables (one slot per worker id).
    pub slots: usize,
    /// Keep a copy of the shard every this many updates (0 = never).
    pub snapshot_every: u64,
    pub connect_attempts: u32,
    pub retry_delay: Duration,
}

impl MasterConfig {
    pub fn new(master_id: u32, scheduler: SocketAddr, x0: Vec<f64>) -> Self {
        Self {
            master_id,
            bind: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), DEFAULT_MASTER_PORT),
            advertise: None,
            scheduler,
            x0,
            max_updates: None,
            slots: 64,
            snapshot_every: 0,
            connect_attempts: 50,
            retry_delay: Duration::from_millis(100),
        }
    }
}

#[derive(Debug)]
pub struct MasterReport {
    pub master_id: u32,
    pub lo: usize,
    pub hi: usize,
    /// Final shard values.
    pub x: Vec<f64>,
    /// Updates applied.
    pub k: u64,
    /// `(k_read, k_applied)` for every applied push.
    pub delays: Vec<(u64, u64)>,
    /// Shard snapshots (`fval` is not known on a master and is NaN).
    pub snapshots: Vec<IterationRecord>,
    /// Per-connection failures that did not stop the master.
    pub errors: Vec<PsError>,
}

struct State {
    policies: Policies,
    x: Vec<f64>,
    g: Vec<f64>,
    scratch: Vec<f64>,
    k: u64,
    delays: Vec<(u64, u64)>,
    snapshots: Vec<IterationRecord>,
    errors: Vec<PsError>,
}

struct Shared {
    id: u32,
    lo: u32,
    hi: u32,
    max_updates: u64,
    snapshot_every: u64,
    start: Instant,
    state: Mutex<State>,
    control: Mutex<TcpStream>,
    stop: AtomicBool,
}

impl Shared {
    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Registers with the scheduler, serves pulls and pushes until TERMINATE,
/// and returns the final shard.
pub fn run_master(cfg: MasterConfig, mut policies: Policies) -> Result<MasterReport> {
    let listener = bind(cfg.bind)?;
    let local = listener.local_addr()?;
    let ip = match (cfg.advertise, local.ip()) {
        (Some(ip), _) => ip,
        (None, IpAddr::V4(ip)) if !ip.is_unspecified() => ip,
        _ => Ipv4Addr::LOCALHOST,
    };
    let mut control = connect_retry(cfg.scheduler, cfg.connect_attempts, cfg.retry_delay).ok_or(
        PsError::SchedulerUnreachable {
            addr: cfg.scheduler,
            attempts: cfg.connect_attempts,
        },
    )?;
    write_message(
        &mut control,
        &Message::RegisterMaster {
            master_id: cfg.master_id,
            ip: u32::from(ip),
            port: u32::from(local.port()),
        },
    )?;
    let (lo, hi) = match read_message(&mut control)? {
        Message::AssignRange { master_id, lo, hi } if master_id == cfg.master_id => (lo, hi),
        other => return Err(PsError::StaleProtocol { tag: other.tag() }),
    };
    let (l, h) = (lo as usize, hi as usize);
    if h > cfg.x0.len() || l >= h {
        return Err(proxpol::Error::DimensionMismatch {
            expected: h,
            got: cfg.x0.len(),
        }
        .into());
    }
    policies.initialize(h - l, cfg.slots)?;

    let shared = Arc::new(Shared {
        id: cfg.master_id,
        lo,
        hi,
        max_updates: cfg.max_updates.unwrap_or(u64::MAX),
        snapshot_every: cfg.snapshot_every,
        start: Instant::now(),
        state: Mutex::new(State {
            policies,
            x: cfg.x0[l..h].to_vec(),
            g: vec![0.0; h - l],
            scratch: vec![0.0; h - l],
            k: 0,
            delays: Vec::new(),
            snapshots: Vec::new(),
            errors: Vec::new(),
        }),
        control: Mutex::new(control.try_clone()?),
        stop: AtomicBool::new(false),
    });

    let handlers: Arc<Mutex<Vec<thread::JoinHandle<()>>>> = Arc::default();
    let acceptor = {
        let sh = shared.clone();
        let handlers = handlers.clone();
        thread::spawn(move || {
            accept_loop(&listener, &sh.stop, |s| {
                let sh2 = sh.clone();
                let h = thread::spawn(move || {
                    if let Err(e) = serve(&sh2, s) {
                        sh2.lock().errors.push(e);
                    }
                });
                handlers.lock().unwrap_or_else(|e| e.into_inner()).push(h);
            })
        })
    };

    // the control connection carries START (informational) and TERMINATE
    let outcome = loop {
        match wait_readable(&control, &shared.stop) {
            Ok(true) => {}
            Ok(false) => {
                break Err(PsError::Io(std::io::Error::new(
                    std::io::ErrorKind::ConnectionAborted,
                    "scheduler closed the control connection",
                )))
            }
            Err(e) => break Err(e.into()),
        }
        match read_message(&mut control) {
            Ok(Message::Start) => {}
            Ok(Message::Terminate) => break Ok(()),
            Ok(other) => break Err(PsError::StaleProtocol { tag: other.tag() }),
            Err(e) => break Err(e.into()),
        }
    };
    shared.stop.store(true, Ordering::Release);
    let _ = acceptor.join();
    let hs = std::mem::take(&mut *handlers.lock().unwrap_or_else(|e| e.into_inner()));
    for h in hs {
        let _ = h.join();
    }
    outcome?;

    let shared = Arc::try_unwrap(shared)
        .map_err(|_| PsError::Io(std::io::Error::other("master threads still running")))?;
    let st = shared.state.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(MasterReport {
        master_id: cfg.master_id,
        lo: l,
        hi: h,
        x: st.x,
        k: st.k,
        delays: st.delays,
        snapshots: st.snapshots,
        errors: st.errors,
    })
}

fn serve(sh: &Shared, mut s: TcpStream) -> Result<()> {
    while wait_readable(&s, &sh.stop)? {
        match read_message(&mut s)? {
            Message::Pull { .. } => {
                let reply = {
                    let st = sh.lock();
                    Message::XSegment {
                        k: st.k,
                        lo: sh.lo,
                        values: st.x.clone(),
                    }
                };
                write_message(&mut s, &reply)?;
            }
            Message::Push {
                worker_id,
                k_read,
                entries,
            } => {
                if let Some(&(index, _)) = entries.iter().find(|(i, _)| *i < sh.lo || *i >= sh.hi) {
                    return Err(PsError::RangeViolation {
                        index,
                        lo: sh.lo,
                        hi: sh.hi,
                    });
                }
                apply(sh, worker_id, k_read, &entries)?;
                write_message(&mut s, &Message::Ack { progress: None })?;
            }
            other => return Err(PsError::StaleProtocol { tag: other.tag() }),
        }
    }
    Ok(())
}

fn apply(sh: &Shared, worker_id: u32, k_read: u64, entries: &[(u32, f64)]) -> Result<()> {
    let mut guard = sh.lock();
    let st = &mut *guard;
    if st.k >= sh.max_updates {
        return Ok(());
    }
    st.g.iter_mut().for_each(|v| *v = 0.0);
    for &(i, v) in entries {
        st.g[(i - sh.lo) as usize] += v;
    }
    let k = st.k;
    st.policies.iterate(
        worker_id as usize,
        k_read,
        k,
        f64::NAN,
        &mut st.x,
        &mut st.g,
        &mut st.scratch,
    )?;
    st.delays.push((k_read, k));
    st.k += 1;
    if sh.snapshot_every > 0 && st.k.is_multiple_of(sh.snapshot_every) {
        st.snapshots.push(IterationRecord {
            k: st.k,
            t_ns: sh.start.elapsed().as_nanos() as u64,
            fval: f64::NAN,
            x: Some(st.x.clone()),
        });
    }
    if st.k.is_multiple_of(REPORT_EVERY) || st.k == sh.max_updates {
        let report = Message::Ack {
            progress: Some((sh.id, st.k)),
        };
        let mut c = sh.control.lock().unwrap_or_else(|e| e.into_inner());
        write_message(&mut *c, &report)?;
    }
    Ok(())
}
