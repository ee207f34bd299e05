//! Small socket helpers shared by the roles.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

pub(crate) const POLL: Duration = Duration::from_millis(20);

pub(crate) fn bind(addr: SocketAddr) -> crate::Result<TcpListener> {
    let l = TcpListener::bind(addr).map_err(|source| crate::PsError::BindFailure { addr, source })?;
    l.set_nonblocking(true)?;
    Ok(l)
}

/// Blocks until a frame starts arriving. Returns `false` if `stop` was raised
/// or the peer closed the connection first.
pub(crate) fn wait_readable(s: &TcpStream, stop: &AtomicBool) -> io::Result<bool> {
    s.set_read_timeout(Some(POLL))?;
    let mut b = [0u8; 1];
    loop {
        if stop.load(Ordering::Acquire) {
            return Ok(false);
        }
        match s.peek(&mut b) {
            Ok(0) => return Ok(false),
            Ok(_) => {
                s.set_read_timeout(None)?;
                return Ok(true);
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
}

/// Accepts connections until `stop` is raised, handing each to `handle`.
pub(crate) fn accept_loop(listener: &TcpListener, stop: &AtomicBool, mut handle: impl FnMut(TcpStream)) {
    while !stop.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((s, _)) => {
                if s.set_nonblocking(false).is_ok() && s.set_nodelay(true).is_ok() {
                    handle(s);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => thread::sleep(POLL),
        }
    }
}

pub(crate) fn connect_retry(addr: SocketAddr, attempts: u32, delay: Duration) -> Option<TcpStream> {
    for i in 0..attempts.max(1) {
        if let Ok(s) = TcpStream::connect(addr) {
            s.set_nodelay(true).ok()?;
            return Some(s);
        }
        if i + 1 < attempts {
            thread::sleep(delay);
        }
    }
    None
}
