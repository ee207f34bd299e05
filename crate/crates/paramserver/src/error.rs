use std::io;
use std::net::SocketAddr;

use thiserror::Error;

use crate::codec::{codec_error, CodecError};

pub type Result<T, E = PsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PsError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: io::Error },

    #[error("master id {0} registered twice")]
    DuplicateMasterId(u32),

    #[error("master id {id} out of range for {masters} masters")]
    UnknownMaster { id: u32, masters: usize },

    #[error("push index {index} outside shard [{lo}, {hi})")]
    RangeViolation { index: u32, lo: u32, hi: u32 },

    #[error("unexpected message tag {tag} in this role")]
    StaleProtocol { tag: u8 },

    #[error("scheduler at {addr} unreachable after {attempts} attempts")]
    SchedulerUnreachable { addr: SocketAddr, attempts: u32 },

    #[error("master {0} did not answer in time")]
    MasterTimeout(u32),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("transport: {0}")]
    Io(io::Error),

    #[error(transparent)]
    Solver(#[from] proxpol::Error),
}

impl From<io::Error> for PsError {
    fn from(e: io::Error) -> Self {
        match codec_error(&e) {
            Some(c) => PsError::Codec(c.clone()),
            None => PsError::Io(e),
        }
    }
}
