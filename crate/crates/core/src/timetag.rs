//! Binary time-tag file format: fixed little-endian layout, 1 ps
//! resolution, bit-exact round-trip.
//!
//! Layout: magic "TFQT", version u16, resolution u32 (ps), channel count
//! u8, then 9-byte records of {time: u64 ps, channel: u8}. Records must
//! be time-sorted; readers reject violations with the record index.

use crate::synth::{DetectionEvent, Detector, EventStream};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"TFQT";
pub const VERSION: u16 = 1;
pub const RESOLUTION_PS: u32 = 1;
pub const N_CHANNELS: u8 = 2;
const HEADER_LEN: usize = 11;
const RECORD_LEN: usize = 9;

#[derive(Debug, Error)]
pub enum TimetagError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u16),
    #[error("unsupported resolution {0} ps or channel count {1}")]
    BadHeader(u32, u8),
    #[error("file truncated inside record {0}")]
    Truncated(usize),
    #[error("records not time-sorted at record {0}")]
    Unsorted(usize),
    #[error("record {0} has unknown channel {1}")]
    BadChannel(usize, u8),
}

fn channel(d: Detector) -> u8 {
    match d {
        Detector::D0 => 0,
        Detector::D1 => 1,
    }
}

pub fn write_timetags<P: AsRef<Path>>(stream: &EventStream, path: P) -> Result<(), TimetagError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&RESOLUTION_PS.to_le_bytes())?;
    w.write_all(&[N_CHANNELS])?;
    for e in &stream.events {
        w.write_all(&e.time_ps.to_le_bytes())?;
        w.write_all(&[channel(e.detector)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timetags<P: AsRef<Path>>(path: P) -> Result<EventStream, TimetagError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| TimetagError::BadMagic)?;
    if header[0..4] != MAGIC {
        return Err(TimetagError::BadMagic);
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(TimetagError::BadVersion(version));
    }
    let res = u32::from_le_bytes([header[6], header[7], header[8], header[9]]);
    if res != RESOLUTION_PS || header[10] != N_CHANNELS {
        return Err(TimetagError::BadHeader(res, header[10]));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % RECORD_LEN != 0 {
        return Err(TimetagError::Truncated(body.len() / RECORD_LEN));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut last = 0u64;
    for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let detector = match rec[8] {
            0 => Detector::D0,
            1 => Detector::D1,
            ch => return Err(TimetagError::BadChannel(i, ch)),
        };
        if t < last {
            return Err(TimetagError::Unsorted(i));
        }
        last = t;
        events.push(DetectionEvent { time_ps: t, detector });
    }
    Ok(EventStream { events })
}
