//! The scheduler: master registry, coordinate directory, worker liveness and
//! the global update budget.
//!
//! Three listening ports: masters register on `control` and report progress
//! there; workers say HELLO on `publish` (and keep saying it as a heartbeat)
//! and receive START/TERMINATE on the same connection; `directory` answers
//! REQUEST_MASTERS.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use proxpol::partition::balanced_ranges;

use crate::codec::{read_message, write_message, MasterInfo, Message, UNASSIGNED};
use crate::net::{accept_loop, bind, wait_readable, POLL};
use crate::{PsError, Result};

pub const DEFAULT_CONTROL_PORT: u16 = 40000;
pub const DEFAULT_PUBLISH_PORT: u16 = 40001;
pub const DEFAULT_DIRECTORY_PORT: u16 = 40002;
pub const DEFAULT_WORKER_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerPorts {
    pub control: u16,
    pub publish: u16,
    pub directory: u16,
}

impl Default for SchedulerPorts {
    fn default() -> Self {
        Self {
            control: DEFAULT_CONTROL_PORT,
            publish: DEFAULT_PUBLISH_PORT,
            directory: DEFAULT_DIRECTORY_PORT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchedulerConfig {
    pub ip: IpAddr,
    pub ports: SchedulerPorts,
    pub masters: usize,
    pub dim: usize,
    /// Updates every master must report before the run terminates.
    pub max_updates: u64,
    pub worker_timeout: Duration,
}

impl SchedulerConfig {
    pub fn new(masters: usize, dim: usize, max_updates: u64) -> Self {
        Self {
            ip: IpAddr::V4(Ipv4Addr::LOCALHOST),
            ports: SchedulerPorts::default(),
            masters,
            dim,
            max_updates,
            worker_timeout: DEFAULT_WORKER_TIMEOUT,
        }
    }

    /// Same configuration on OS-assigned loopback ports.
    pub fn ephemeral(mut self) -> Self {
        self.ip = IpAddr::V4(Ipv4Addr::LOCALHOST);
        self.ports = SchedulerPorts {
            control: 0,
            publish: 0,
            directory: 0,
        };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerAddrs {
    pub control: SocketAddr,
    pub publish: SocketAddr,
    pub directory: SocketAddr,
}

#[derive(Debug, Clone, Default)]
pub struct SchedulerReport {
    pub masters: Vec<MasterInfo>,
    /// Update counts last reported by each master.
    pub progress: Vec<u64>,
    pub workers_seen: Vec<u32>,
    pub evicted: Vec<u32>,
}

struct WorkerEntry {
    last_seen: Instant,
    stream: TcpStream,
}

struct State {
    masters: Vec<Option<(MasterInfo, TcpStream)>>,
    progress: Vec<u64>,
    started: bool,
    done: bool,
    error: Option<PsError>,
    workers: BTreeMap<u32, WorkerEntry>,
    next_worker: u32,
    seen: Vec<u32>,
    evicted: Vec<u32>,
}

impl State {
    fn broadcast(&mut self, msg: &Message) {
        for (_, s) in self.masters.iter_mut().flatten() {
            let _ = write_message(s, msg);
        }
        for w in self.workers.values_mut() {
            let _ = write_message(&mut w.stream, msg);
        }
    }

    fn fail(&mut self, e: PsError) {
        self.error.get_or_insert(e);
    }
}

struct Shared {
    cfg: SchedulerConfig,
    ranges: Vec<std::ops::Range<usize>>,
    state: Mutex<State>,
    wake: Condvar,
    stop: AtomicBool,
}

impl Shared {
    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct Scheduler {
    control: TcpListener,
    publish: TcpListener,
    directory: TcpListener,
    cfg: SchedulerConfig,
}

impl Scheduler {
    pub fn bind(cfg: SchedulerConfig) -> Result<Self> {
        if cfg.masters == 0 || cfg.masters > cfg.dim {
            return Err(proxpol::Error::Config(format!(
                "need 1 to {} masters for dimension {}, got {}",
                cfg.dim, cfg.dim, cfg.masters
            ))
            .into());
        }
        let at = |port| SocketAddr::new(cfg.ip, port);
        Ok(Self {
            control: bind(at(cfg.ports.control))?,
            publish: bind(at(cfg.ports.publish))?,
            directory: bind(at(cfg.ports.directory))?,
            cfg,
        })
    }

    pub fn addrs(&self) -> SchedulerAddrs {
        SchedulerAddrs {
            control: self.control.local_addr().expect("bound listener"),
            publish: self.publish.local_addr().expect("bound listener"),
            directory: self.directory.local_addr().expect("bound listener"),
        }
    }

    /// Serves until every master has reported the update budget, then
    /// broadcasts TERMINATE. Master failures abort the run; silent workers
    /// are evicted.
    pub fn run(self) -> Result<SchedulerReport> {
        let shared = Arc::new(Shared {
            ranges: balanced_ranges(self.cfg.dim, self.cfg.masters),
            state: Mutex::new(State {
                masters: (0..self.cfg.masters).map(|_| None).collect(),
                progress: vec![0; self.cfg.masters],
                started: false,
                done: false,
                error: None,
                workers: BTreeMap::new(),
                next_worker: 0,
                seen: Vec::new(),
                evicted: Vec::new(),
            }),
            wake: Condvar::new(),
            stop: AtomicBool::new(false),
            cfg: self.cfg,
        });

        let mut threads = Vec::new();
        for (listener, role) in [
            (self.control, Role::Master),
            (self.publish, Role::Worker),
            (self.directory, Role::Directory),
        ] {
            let sh = shared.clone();
            threads.push(thread::spawn(move || {
                accept_loop(&listener, &sh.stop, |s| {
                    let sh = sh.clone();
                    thread::spawn(move || match role {
                        Role::Master => serve_master(&sh, s),
                        Role::Worker => serve_worker(&sh, s),
                        Role::Directory => serve_directory(&sh, s),
                    });
                })
            }));
        }

        let result = {
            let mut st = shared.lock();
            loop {
                if let Some(e) = st.error.take() {
                    st.broadcast(&Message::Terminate);
                    break Err(e);
                }
                if st.done {
                    break Ok(SchedulerReport {
                        masters: st.masters.iter().flatten().map(|(m, _)| *m).collect(),
                        progress: st.progress.clone(),
                        workers_seen: st.seen.clone(),
                        evicted: st.evicted.clone(),
                    });
                }
                let timeout = shared.cfg.worker_timeout;
                let now = Instant::now();
                let stale: Vec<u32> = st
                    .workers
                    .iter()
                    .filter(|(_, w)| now.duration_since(w.last_seen) > timeout)
                    .map(|(&id, _)| id)
                    .collect();
                for id in stale {
                    if let Some(w) = st.workers.remove(&id) {
                        let _ = w.stream.shutdown(std::net::Shutdown::Both);
                    }
                    st.evicted.push(id);
                }
                st = shared
                    .wake
                    .wait_timeout(st, POLL * 5)
                    .unwrap_or_else(|e| e.into_inner())
                    .0;
            }
        };
        shared.stop.store(true, Ordering::Release);
        for t in threads {
            let _ = t.join();
        }
        result
    }
}

#[derive(Clone, Copy)]
enum Role {
    Master,
    Worker,
    Directory,
}

fn serve_master(sh: &Shared, mut s: TcpStream) {
    let fail = |e: PsError| {
        sh.lock().fail(e);
        sh.wake.notify_all();
    };
    let reg = match wait_readable(&s, &sh.stop).map(|ok| ok.then(|| read_message(&mut s))) {
        Ok(Some(Ok(m))) => m,
        Ok(None) => return,
        Ok(Some(Err(e))) | Err(e) => return fail(e.into()),
    };
    let Message::RegisterMaster { master_id, ip, port } = reg else {
        return fail(PsError::StaleProtocol { tag: reg.tag() });
    };
    let id = master_id as usize;
    let range = match sh.ranges.get(id) {
        Some(r) => r.clone(),
        None => {
            return fail(PsError::UnknownMaster {
                id: master_id,
                masters: sh.ranges.len(),
            })
        }
    };
    let info = MasterInfo {
        id: master_id,
        ip,
        port,
        lo: range.start as u32,
        hi: range.end as u32,
    };
    {
        let mut st = sh.lock();
        if st.masters[id].is_some() {
            drop(st);
            return fail(PsError::DuplicateMasterId(master_id));
        }
        let reply = Message::AssignRange {
            master_id,
            lo: info.lo,
            hi: info.hi,
        };
        let writer = match write_message(&mut s, &reply).and_then(|_| s.try_clone()) {
            Ok(w) => w,
            Err(e) => {
                st.fail(e.into());
                drop(st);
                sh.wake.notify_all();
                return;
            }
        };
        st.masters[id] = Some((info, writer));
        if !st.started && st.masters.iter().all(Option::is_some) {
            st.started = true;
            st.broadcast(&Message::Start);
        }
    }
    sh.wake.notify_all();

    loop {
        match wait_readable(&s, &sh.stop) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return fail(e.into()),
        }
        match read_message(&mut s) {
            Ok(Message::Ack {
                progress: Some((mid, n)),
            }) if mid == master_id => {
                let mut st = sh.lock();
                st.progress[id] = st.progress[id].max(n);
                let budget = sh.cfg.max_updates;
                if !st.done && st.progress.iter().all(|&p| p >= budget) {
                    st.done = true;
                    st.broadcast(&Message::Terminate);
                }
                drop(st);
                sh.wake.notify_all();
            }
            Ok(other) => return fail(PsError::StaleProtocol { tag: other.tag() }),
            Err(e) => return fail(e.into()),
        }
    }
    let st = sh.lock();
    if !st.done && !sh.stop.load(Ordering::Acquire) {
        drop(st);
        fail(PsError::Io(std::io::Error::new(
            std::io::ErrorKind::ConnectionAborted,
            format!("master {master_id} disconnected before the run finished"),
        )));
    }
}

fn serve_worker(sh: &Shared, mut s: TcpStream) {
    let mut id = None;
    while let Ok(true) = wait_readable(&s, &sh.stop) {
        let msg = match read_message(&mut s) {
            Ok(m) => m,
            Err(_) => break,
        };
        let Message::Hello { worker_id } = msg else {
            break;
        };
        let mut st = sh.lock();
        match id {
            None => {
                let wid = if worker_id == UNASSIGNED {
                    st.next_worker
                } else {
                    worker_id
                };
                st.next_worker = st.next_worker.max(wid.saturating_add(1));
                let Ok(writer) = s.try_clone() else { break };
                let mut entry = WorkerEntry {
                    last_seen: Instant::now(),
                    stream: writer,
                };
                let mut ok = write_message(&mut entry.stream, &Message::Hello { worker_id: wid }).is_ok();
                if st.done {
                    ok &= write_message(&mut entry.stream, &Message::Terminate).is_ok();
                } else if st.started {
                    ok &= write_message(&mut entry.stream, &Message::Start).is_ok();
                }
                if !ok {
                    break;
                }
                st.workers.insert(wid, entry);
                st.seen.push(wid);
                id = Some(wid);
            }
            Some(wid) => match st.workers.get_mut(&wid) {
                Some(w) => w.last_seen = Instant::now(),
                // evicted; a late heartbeat does not resurrect it
                None => break,
            },
        }
    }
    if let Some(wid) = id {
        sh.lock().workers.remove(&wid);
    }
}

fn serve_directory(sh: &Shared, mut s: TcpStream) {
    while let Ok(true) = wait_readable(&s, &sh.stop) {
        let coords = match read_message(&mut s) {
            Ok(Message::RequestMasters { coords }) => coords,
            _ => return,
        };
        let masters: Vec<MasterInfo> = {
            let st = sh.lock();
            st.masters
                .iter()
                .flatten()
                .map(|(m, _)| *m)
                .filter(|m| coords.is_empty() || coords.iter().any(|&c| m.lo <= c && c < m.hi))
                .collect()
        };
        if write_message(&mut s, &Message::MasterList { masters }).is_err() {
            return;
        }
    }
}
