//! Wire format shared by every role.
//!
//! A frame is `[tag: u8][len: u64 LE][payload: len bytes]`. Payload fields
//! are little-endian in declaration order: ids, coordinates and counts are
//! `u32`, iteration stamps `u64`, values `f64`.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const HEADER_LEN: usize = 9;

/// Upper bound on a payload we are willing to allocate for.
pub const MAX_PAYLOAD: u64 = 1 << 30;

pub mod tag {
    pub const HELLO: u8 = 1;
    pub const REGISTER_MASTER: u8 = 2;
    pub const ASSIGN_RANGE: u8 = 3;
    pub const REQUEST_MASTERS: u8 = 4;
    pub const MASTER_LIST: u8 = 5;
    pub const PULL: u8 = 6;
    pub const X_SEGMENT: u8 = 7;
    pub const PUSH: u8 = 8;
    pub const ACK: u8 = 9;
    pub const START: u8 = 10;
    pub const TERMINATE: u8 = 11;
}

/// `worker_id` a worker sends in its first HELLO to ask for an id.
pub const UNASSIGNED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterInfo {
    pub id: u32,
    /// IPv4 address as a big-endian integer (`u32::from(Ipv4Addr)`).
    pub ip: u32,
    pub port: u32,
    pub lo: u32,
    pub hi: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        worker_id: u32,
    },
    RegisterMaster {
        master_id: u32,
        ip: u32,
        port: u32,
    },
    AssignRange {
        master_id: u32,
        lo: u32,
        hi: u32,
    },
    RequestMasters {
        coords: Vec<u32>,
    },
    MasterList {
        masters: Vec<MasterInfo>,
    },
    Pull {
        worker_id: u32,
    },
    XSegment {
        k: u64,
        lo: u32,
        values: Vec<f64>,
    },
    Push {
        worker_id: u32,
        k_read: u64,
        entries: Vec<(u32, f64)>,
    },
    /// Plain acknowledgement, or a master's progress report to the
    /// scheduler when `progress` is set.
    Ack {
        progress: Option<(u32, u64)>,
    },
    Start,
    Terminate,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated frame: need {needed} bytes, have {have}")]
    TruncatedFrame { needed: u64, have: u64 },
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("payload length {declared} does not match the message layout")]
    LengthMismatch { declared: u64 },
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Hello { .. } => tag::HELLO,
            Message::RegisterMaster { .. } => tag::REGISTER_MASTER,
            Message::AssignRange { .. } => tag::ASSIGN_RANGE,
            Message::RequestMasters { .. } => tag::REQUEST_MASTERS,
            Message::MasterList { .. } => tag::MASTER_LIST,
            Message::Pull { .. } => tag::PULL,
            Message::XSegment { .. } => tag::X_SEGMENT,
            Message::Push { .. } => tag::PUSH,
            Message::Ack { .. } => tag::ACK,
            Message::Start => tag::START,
            Message::Terminate => tag::TERMINATE,
        }
    }

    fn payload_len(&self) -> usize {
        match self {
            Message::Hello { .. } | Message::Pull { .. } => 4,
            Message::RegisterMaster { .. } | Message::AssignRange { .. } => 12,
            Message::RequestMasters { coords } => 4 + 4 * coords.len(),
            Message::MasterList { masters } => 4 + 20 * masters.len(),
            Message::XSegment { values, .. } => 16 + 8 * values.len(),
            Message::Push { entries, .. } => 16 + 12 * entries.len(),
            Message::Ack { progress } => progress.map_or(0, |_| 12),
            Message::Start | Message::Terminate => 0,
        }
    }
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let len = msg.payload_len();
    let mut b = Vec::with_capacity(HEADER_LEN + len);
    b.push(msg.tag());
    b.extend_from_slice(&(len as u64).to_le_bytes());
    let u32le = |b: &mut Vec<u8>, v: u32| b.extend_from_slice(&v.to_le_bytes());
    match msg {
        Message::Hello { worker_id } | Message::Pull { worker_id } => u32le(&mut b, *worker_id),
        Message::RegisterMaster { master_id, ip, port } => {
            u32le(&mut b, *master_id);
            u32le(&mut b, *ip);
            u32le(&mut b, *port);
        }
        Message::AssignRange { master_id, lo, hi } => {
            u32le(&mut b, *master_id);
            u32le(&mut b, *lo);
            u32le(&mut b, *hi);
        }
        Message::RequestMasters { coords } => {
            u32le(&mut b, coords.len() as u32);
            coords.iter().for_each(|&c| u32le(&mut b, c));
        }
        Message::MasterList { masters } => {
            u32le(&mut b, masters.len() as u32);
            for m in masters {
                for v in [m.id, m.ip, m.port, m.lo, m.hi] {
                    u32le(&mut b, v);
                }
            }
        }
        Message::XSegment { k, lo, values } => {
            b.extend_from_slice(&k.to_le_bytes());
            u32le(&mut b, *lo);
            u32le(&mut b, values.len() as u32);
            values.iter().for_each(|v| b.extend_from_slice(&v.to_le_bytes()));
        }
        Message::Push {
            worker_id,
            k_read,
            entries,
        } => {
            u32le(&mut b, *worker_id);
            b.extend_from_slice(&k_read.to_le_bytes());
            u32le(&mut b, entries.len() as u32);
            for &(i, v) in entries {
                u32le(&mut b, i);
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        Message::Ack { progress } => {
            if let Some((id, n)) = progress {
                u32le(&mut b, *id);
                b.extend_from_slice(&n.to_le_bytes());
            }
        }
        Message::Start | Message::Terminate => {}
    }
    debug_assert_eq!(b.len(), HEADER_LEN + len);
    b
}

struct Cursor<'a> {
    buf: &'a [u8],
    declared: u64,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        if self.buf.len() < N {
            return Err(CodecError::LengthMismatch {
                declared: self.declared,
            });
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("split at N"))
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        self.take::<4>().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64, CodecError> {
        self.take::<8>().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, CodecError> {
        self.take::<8>().map(f64::from_le_bytes)
    }
    /// Reads a count and checks the remaining payload holds exactly
    /// `count` items of `item` bytes.
    fn count(&mut self, item: usize) -> Result<usize, CodecError> {
        let n = self.u32()? as usize;
        if n.checked_mul(item) != Some(self.buf.len()) {
            return Err(CodecError::LengthMismatch {
                declared: self.declared,
            });
        }
        Ok(n)
    }
    fn finish(self) -> Result<(), CodecError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(CodecError::LengthMismatch {
                declared: self.declared,
            })
        }
    }
}

/// Parses `[tag][len]`, checking the tag is known.
pub fn decode_header(h: &[u8; HEADER_LEN]) -> Result<(u8, u64), CodecError> {
    let tag = h[0];
    if !(tag::HELLO..=tag::TERMINATE).contains(&tag) {
        return Err(CodecError::UnknownTag(tag));
    }
    let len = u64::from_le_bytes(h[1..].try_into().expect("8 bytes"));
    Ok((tag, len))
}

/// Decodes a payload whose header has already been read.
pub fn decode_payload(tag: u8, payload: &[u8]) -> Result<Message, CodecError> {
    let mut c = Cursor {
        buf: payload,
        declared: payload.len() as u64,
    };
    let msg = match tag {
        tag::HELLO => Message::Hello { worker_id: c.u32()? },
        tag::PULL => Message::Pull { worker_id: c.u32()? },
        tag::REGISTER_MASTER => Message::RegisterMaster {
            master_id: c.u32()?,
            ip: c.u32()?,
            port: c.u32()?,
        },
        tag::ASSIGN_RANGE => Message::AssignRange {
            master_id: c.u32()?,
            lo: c.u32()?,
            hi: c.u32()?,
        },
        tag::REQUEST_MASTERS => {
            let n = c.count(4)?;
            let coords = (0..n).map(|_| c.u32()).collect::<Result<_, _>>()?;
            Message::RequestMasters { coords }
        }
        tag::MASTER_LIST => {
            let n = c.count(20)?;
            let mut masters = Vec::with_capacity(n);
            for _ in 0..n {
                masters.push(MasterInfo {
                    id: c.u32()?,
                    ip: c.u32()?,
                    port: c.u32()?,
                    lo: c.u32()?,
                    hi: c.u32()?,
                });
            }
            Message::MasterList { masters }
        }
        tag::X_SEGMENT => {
            let k = c.u64()?;
            let lo = c.u32()?;
            let n = c.count(8)?;
            let values = (0..n).map(|_| c.f64()).collect::<Result<_, _>>()?;
            Message::XSegment { k, lo, values }
        }
        tag::PUSH => {
            let worker_id = c.u32()?;
            let k_read = c.u64()?;
            let n = c.count(12)?;
            let mut entries = Vec::with_capacity(n);
            for _ in 0..n {
                entries.push((c.u32()?, c.f64()?));
            }
            Message::Push {
                worker_id,
                k_read,
                entries,
            }
        }
        tag::ACK => match payload.len() {
            0 => Message::Ack { progress: None },
            _ => Message::Ack {
                progress: Some((c.u32()?, c.u64()?)),
            },
        },
        tag::START => Message::Start,
        tag::TERMINATE => Message::Terminate,
        other => return Err(CodecError::UnknownTag(other)),
    };
    c.finish()?;
    Ok(msg)
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
    let (msg, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(CodecError::LengthMismatch {
            declared: (used - HEADER_LEN) as u64,
        });
    }
    Ok(msg)
}

/// Decodes the frame at the start of `bytes`, returning it and the number of
/// bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Message, usize), CodecError> {
    if bytes.is_empty() {
        return Err(CodecError::TruncatedFrame {
            needed: HEADER_LEN as u64,
            have: 0,
        });
    }
    if !(tag::HELLO..=tag::TERMINATE).contains(&bytes[0]) {
        return Err(CodecError::UnknownTag(bytes[0]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::TruncatedFrame {
            needed: HEADER_LEN as u64,
            have: bytes.len() as u64,
        });
    }
    let (tag, len) = decode_header(bytes[..HEADER_LEN].try_into().expect("header"))?;
    let have = (bytes.len() - HEADER_LEN) as u64;
    if len > have {
        return Err(CodecError::TruncatedFrame { needed: len, have });
    }
    let end = HEADER_LEN + len as usize;
    Ok((decode_payload(tag, &bytes[HEADER_LEN..end])?, end))
}

/// Reads one frame from a byte stream. End of stream before the first byte
/// is reported as `UnexpectedEof`; a frame cut short as `TruncatedFrame`.
pub fn read_message<R: Read>(r: &mut R) -> io::Result<Message> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header[..1])?;
    read_rest(r, header)
}

fn read_rest<R: Read>(r: &mut R, mut header: [u8; HEADER_LEN]) -> io::Result<Message> {
    let truncated = |e: io::Error, needed: u64| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            invalid(CodecError::TruncatedFrame { needed, have: 0 })
        } else {
            e
        }
    };
    if !(tag::HELLO..=tag::TERMINATE).contains(&header[0]) {
        return Err(invalid(CodecError::UnknownTag(header[0])));
    }
    r.read_exact(&mut header[1..]).map_err(|e| truncated(e, 8))?;
    let (tag, len) = decode_header(&header).map_err(invalid)?;
    if len > MAX_PAYLOAD {
        return Err(invalid(CodecError::LengthMismatch { declared: len }));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload).map_err(|e| truncated(e, len))?;
    decode_payload(tag, &payload).map_err(invalid)
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode(msg))?;
    w.flush()
}

fn invalid(e: CodecError) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

/// Recovers a codec error carried inside an `io::Error`.
pub fn codec_error(e: &io::Error) -> Option<&CodecError> {
    e.get_ref().and_then(|inner| inner.downcast_ref::<CodecError>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ack_bytes() {
        assert_eq!(
            encode(&Message::Ack { progress: None }),
            vec![9, 0, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(encode(&Message::Terminate), vec![11, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn push_layout() {
        let m = Message::Push {
            worker_id: 2,
            k_read: 7,
            entries: vec![(1, 0.5), (4, -1.0), (9, 3.25)],
        };
        let b = encode(&m);
        assert_eq!(b.len(), 9 + 16 + 36);
        assert_eq!(&b[1..9], &52u64.to_le_bytes());
        assert_eq!(&b[9..13], &2u32.to_le_bytes());
        assert_eq!(&b[13..21], &7u64.to_le_bytes());
        assert_eq!(decode(&b).unwrap(), m);
    }

    #[test]
    fn declared_length_beyond_buffer_is_truncated() {
        let mut b = encode(&Message::Hello { worker_id: 3 });
        b.pop();
        assert!(matches!(
            decode(&b),
            Err(CodecError::TruncatedFrame { needed: 4, have: 3 })
        ));
        assert!(matches!(decode(&b[..5]), Err(CodecError::TruncatedFrame { .. })));
    }

    #[test]
    fn unknown_tags() {
        for t in [0u8, 12, 200] {
            let mut b = encode(&Message::Start);
            b[0] = t;
            assert_eq!(decode(&b), Err(CodecError::UnknownTag(t)));
        }
    }

    #[test]
    fn inconsistent_counts() {
        // count says two coordinates, payload holds one
        let mut b = vec![tag::REQUEST_MASTERS];
        b.extend_from_slice(&8u64.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&5u32.to_le_bytes());
        assert!(matches!(decode(&b), Err(CodecError::LengthMismatch { .. })));
        // trailing payload bytes after a fixed-size message
        let mut b = vec![tag::START];
        b.extend_from_slice(&1u64.to_le_bytes());
        b.push(0);
        assert!(matches!(decode(&b), Err(CodecError::LengthMismatch { .. })));
    }

    #[test]
    fn stream_reading() {
        let mut buf = Vec::new();
        write_message(&mut buf, &Message::Start).unwrap();
        write_message(&mut buf, &Message::Pull { worker_id: 1 }).unwrap();
        let mut r = &buf[..];
        assert_eq!(read_message(&mut r).unwrap(), Message::Start);
        assert_eq!(read_message(&mut r).unwrap(), Message::Pull { worker_id: 1 });
        assert_eq!(
            read_message(&mut r).unwrap_err().kind(),
            io::ErrorKind::UnexpectedEof
        );

        let cut = &buf[..buf.len() - 1];
        let mut r = &cut[9..];
        let e = read_message(&mut r).unwrap_err();
        assert!(matches!(codec_error(&e), Some(CodecError::TruncatedFrame { .. })));
    }
}
