//! A worker holds part of the data. Each round it pulls the shards it
//! needs, evaluates its sampled loss there, and pushes the gradient pieces
//! back to their owners.

use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use proxpol::{IterationRecord, Logger, Loss, Sampler};

use crate::codec::{read_message, write_message, MasterInfo, Message, UNASSIGNED};
use crate::net::{connect_retry, wait_readable, POLL};
use crate::{PsError, Result};

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub publish: SocketAddr,
    pub directory: SocketAddr,
    /// Fixed id, or `None` to have the scheduler assign one.
    pub worker_id: Option<u32>,
    pub heartbeat: Duration,
    pub connect_attempts: u32,
    pub retry_delay: Duration,
    pub master_timeout: Duration,
    /// Coordinates this worker's data touches; all of them when `None`.
    pub coords: Option<Vec<u32>>,
}

impl WorkerConfig {
    pub fn new(publish: SocketAddr, directory: SocketAddr) -> Self {
        Self {
            publish,
            directory,
            worker_id: None,
            heartbeat: Duration::from_secs(1),
            connect_attempts: 50,
            retry_delay: Duration::from_millis(100),
            master_timeout: Duration::from_secs(30),
            coords: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerReport {
    pub worker_id: u32,
    pub rounds: u64,
}

struct MasterLink {
    info: MasterInfo,
    stream: TcpStream,
}

/// Runs until the scheduler sends TERMINATE. Logs one record per round with
/// the local loss at the pulled point.
pub fn run_worker<L, G>(
    cfg: &WorkerConfig,
    loss: &L,
    sampler: &Sampler,
    mut logger: G,
) -> Result<WorkerReport>
where
    L: Loss + ?Sized,
    G: Logger,
{
    let unreachable = || PsError::SchedulerUnreachable {
        addr: cfg.publish,
        attempts: cfg.connect_attempts,
    };
    let mut sub =
        connect_retry(cfg.publish, cfg.connect_attempts, cfg.retry_delay).ok_or_else(unreachable)?;
    write_message(
        &mut sub,
        &Message::Hello {
            worker_id: cfg.worker_id.unwrap_or(UNASSIGNED),
        },
    )?;
    let id = match read_message(&mut sub)? {
        Message::Hello { worker_id } => worker_id,
        other => return Err(PsError::StaleProtocol { tag: other.tag() }),
    };
    match read_message(&mut sub)? {
        Message::Start => {}
        Message::Terminate => {
            return Ok(WorkerReport {
                worker_id: id,
                rounds: 0,
            })
        }
        other => return Err(PsError::StaleProtocol { tag: other.tag() }),
    }

    let stop = AtomicBool::new(false);
    let done = AtomicBool::new(false);
    let completed = AtomicU64::new(0);
    let mut beat = sub.try_clone()?;
    let result = thread::scope(|s| {
        // TERMINATE (or a vanished scheduler) ends the run
        s.spawn(|| {
            let mut sub = sub;
            while let Ok(true) = wait_readable(&sub, &done) {
                match read_message(&mut sub) {
                    Ok(Message::Terminate) | Err(_) => break,
                    Ok(_) => {}
                }
            }
            stop.store(true, Ordering::Release);
        });
        s.spawn(|| {
            let mut last = Instant::now();
            while !stop.load(Ordering::Acquire) && !done.load(Ordering::Acquire) {
                if last.elapsed() >= cfg.heartbeat {
                    if write_message(&mut beat, &Message::Hello { worker_id: id }).is_err() {
                        break;
                    }
                    last = Instant::now();
                }
                thread::sleep(POLL);
            }
        });
        let r = rounds(cfg, id, loss, sampler, &mut logger, &stop, &completed);
        done.store(true, Ordering::Release);
        r
    });
    match result {
        Ok(()) => {}
        // a master closing on us is expected once the run is over
        Err(_) if terminated_soon(&stop) => {}
        Err(e) => return Err(e),
    }
    Ok(WorkerReport {
        worker_id: id,
        rounds: completed.load(Ordering::Acquire),
    })
}

fn terminated_soon(stop: &AtomicBool) -> bool {
    let t = Instant::now();
    while t.elapsed() < Duration::from_secs(2) {
        if stop.load(Ordering::Acquire) {
            return true;
        }
        thread::sleep(POLL);
    }
    stop.load(Ordering::Acquire)
}

fn rounds<L, G>(
    cfg: &WorkerConfig,
    id: u32,
    loss: &L,
    sampler: &Sampler,
    logger: &mut G,
    stop: &AtomicBool,
    completed: &AtomicU64,
) -> Result<()>
where
    L: Loss + ?Sized,
    G: Logger,
{
    let dim = loss.dim();
    let coords = cfg.coords.clone().unwrap_or_else(|| (0..dim as u32).collect());
    let mut dir = connect_retry(cfg.directory, cfg.connect_attempts, cfg.retry_delay).ok_or(
        PsError::SchedulerUnreachable {
            addr: cfg.directory,
            attempts: cfg.connect_attempts,
        },
    )?;
    write_message(&mut dir, &Message::RequestMasters { coords })?;
    let mut infos = match read_message(&mut dir)? {
        Message::MasterList { masters } => masters,
        other => return Err(PsError::StaleProtocol { tag: other.tag() }),
    };
    infos.sort_by_key(|m| m.lo);
    let mut links = Vec::with_capacity(infos.len());
    for info in infos {
        let addr = SocketAddr::V4(SocketAddrV4::new(Ipv4Addr::from(info.ip), info.port as u16));
        let stream = connect_retry(addr, cfg.connect_attempts, cfg.retry_delay)
            .ok_or(PsError::MasterTimeout(info.id))?;
        stream.set_read_timeout(Some(cfg.master_timeout))?;
        links.push(MasterLink { info, stream });
    }

    let start = Instant::now();
    let mut sampler = sampler.clone();
    let mut x = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut k_read = vec![0u64; links.len()];
    let wants_x = logger.wants_x();
    let timeout = |e: std::io::Error, id: u32| match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => PsError::MasterTimeout(id),
        _ => e.into(),
    };
    let mut round = 0u64;
    while !stop.load(Ordering::Acquire) {
        for l in &mut links {
            write_message(&mut l.stream, &Message::Pull { worker_id: id })?;
        }
        for (l, kr) in links.iter_mut().zip(&mut k_read) {
            match read_message(&mut l.stream).map_err(|e| timeout(e, l.info.id))? {
                Message::XSegment { k, lo, values } => {
                    let lo = lo as usize;
                    if lo + values.len() > dim {
                        return Err(proxpol::Error::DimensionMismatch {
                            expected: dim,
                            got: lo + values.len(),
                        }
                        .into());
                    }
                    x[lo..lo + values.len()].copy_from_slice(&values);
                    *kr = k;
                }
                other => return Err(PsError::StaleProtocol { tag: other.tag() }),
            }
        }
        if stop.load(Ordering::Acquire) {
            break;
        }
        let batch = sampler.next_batch();
        let fval = if batch.full {
            loss.full(&x, &mut g)?
        } else {
            loss.partial(&x, &mut g, batch.indices)?
        };
        logger.log(IterationRecord {
            k: round,
            t_ns: start.elapsed().as_nanos() as u64,
            fval,
            x: wants_x.then(|| x.clone()),
        });
        for (l, &kr) in links.iter_mut().zip(&k_read) {
            let (lo, hi) = (l.info.lo as usize, l.info.hi as usize);
            let entries = g[lo..hi]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| ((lo + j) as u32, v))
                .collect();
            write_message(
                &mut l.stream,
                &Message::Push {
                    worker_id: id,
                    k_read: kr,
                    entries,
                },
            )?;
        }
        for l in &mut links {
            match read_message(&mut l.stream).map_err(|e| timeout(e, l.info.id))? {
                Message::Ack { .. } => {}
                other => return Err(PsError::StaleProtocol { tag: other.tag() }),
            }
        }
        round += 1;
        completed.store(round, Ordering::Release);
    }
    Ok(())
}
