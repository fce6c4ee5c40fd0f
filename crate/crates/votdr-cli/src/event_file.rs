//! On-disk photon event format.
//!
//! Layout:
//!
//! ```text
//! "VOTDR1"              6 bytes, magic
//! version               u16 little endian, currently 1
//! header length         u32 little endian
//! header                JSON: the run snapshot plus the event count
//! records               16 bytes each: pulse_index u64 LE, timestamp_ps u64 LE
//! ```
//!
//! Events are stored sorted by (pulse_index, timestamp_ps). The count in
//! the header must match the body exactly, so torn writes and truncation
//! are detected on read. The config snapshot makes every file
//! self-describing: analysis needs no second look at the original config.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use votdr_core::simulator::{PhotonEvent, PhotonEventStream};

use crate::config::RunConfig;

pub const MAGIC: &[u8; 6] = b"VOTDR1";
pub const FORMAT_VERSION: u16 = 1;
const RECORD_BYTES: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum EventFileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not an event file (bad magic)")]
    BadMagic { path: String },
    #[error("{path}: format version {found} is not supported (expected {FORMAT_VERSION})")]
    BadVersion { path: String, found: u16 },
    #[error("{path}: header is not valid JSON: {source}")]
    BadHeader {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: file ends early ({context})")]
    Truncated { path: String, context: String },
    #[error("{path}: {extra} bytes of trailing data after the last record")]
    TrailingData { path: String, extra: usize },
    #[error("{path}: header promises {expected} events but the body holds {found}")]
    CountMismatch {
        path: String,
        expected: u64,
        found: u64,
    },
    #[error("{path}: records out of order at index {index}")]
    Unsorted { path: String, index: usize },
}

/// What sits between the fixed preamble and the records.
#[derive(Debug, Serialize, Deserialize)]
struct FileHeader {
    run: RunConfig,
    event_count: u64,
}

/// A run snapshot together with its recorded events.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub run: RunConfig,
    pub events: Vec<PhotonEvent>,
}

impl EventFile {
    pub fn stream(&self) -> PhotonEventStream {
        PhotonEventStream {
            header: self.run.acquisition.clone(),
            events: self.events.clone(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EventFileError + '_ {
    move |source| EventFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_events(
    path: &Path,
    run: &RunConfig,
    events: &[PhotonEvent],
) -> Result<(), EventFileError> {
    debug_assert!(events
        .windows(2)
        .all(|w| (w[0].pulse_index, w[0].timestamp_ps) <= (w[1].pulse_index, w[1].timestamp_ps)));
    let header = FileHeader {
        run: run.clone(),
        event_count: events.len() as u64,
    };
    let header_json = serde_json::to_vec(&header).expect("run snapshot serializes");

    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<std::fs::File>, bytes: &[u8]| {
        out.write_all(bytes).map_err(io_err(path))
    };
    write(&mut out, MAGIC)?;
    write(&mut out, &FORMAT_VERSION.to_le_bytes())?;
    write(&mut out, &(header_json.len() as u32).to_le_bytes())?;
    write(&mut out, &header_json)?;
    for ev in events {
        write(&mut out, &ev.pulse_index.to_le_bytes())?;
        write(&mut out, &ev.timestamp_ps.to_le_bytes())?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_events(path: &Path) -> Result<EventFile, EventFileError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut input = BufReader::new(file);

    let mut preamble = [0u8; 12];
    read_exact(&mut input, &mut preamble, &display, "in the preamble")?;
    if &preamble[..6] != MAGIC {
        return Err(EventFileError::BadMagic { path: display });
    }
    let version = u16::from_le_bytes([preamble[6], preamble[7]]);
    if version != FORMAT_VERSION {
        return Err(EventFileError::BadVersion {
            path: display,
            found: version,
        });
    }
    let header_len = u32::from_le_bytes([preamble[8], preamble[9], preamble[10], preamble[11]]);

    let mut header_json = vec![0u8; header_len as usize];
    read_exact(&mut input, &mut header_json, &display, "in the header")?;
    let header: FileHeader =
        serde_json::from_slice(&header_json).map_err(|source| EventFileError::BadHeader {
            path: display.clone(),
            source,
        })?;

    let mut body = Vec::new();
    input.read_to_end(&mut body).map_err(io_err(path))?;
    let extra = body.len() % RECORD_BYTES;
    if extra != 0 {
        // A short final record is truncation; more than a whole spare
        // record's worth would also land here, reported as trailing data.
        if body.len() / RECORD_BYTES < header.event_count as usize {
            return Err(EventFileError::Truncated {
                path: display,
                context: format!("{extra} stray bytes in the record section"),
            });
        }
        return Err(EventFileError::TrailingData {
            path: display,
            extra,
        });
    }
    let found = (body.len() / RECORD_BYTES) as u64;
    if found != header.event_count {
        return Err(EventFileError::CountMismatch {
            path: display,
            expected: header.event_count,
            found,
        });
    }

    let mut events = Vec::with_capacity(found as usize);
    for (index, rec) in body.chunks_exact(RECORD_BYTES).enumerate() {
        let ev = PhotonEvent {
            pulse_index: u64::from_le_bytes(rec[..8].try_into().unwrap()),
            timestamp_ps: u64::from_le_bytes(rec[8..].try_into().unwrap()),
        };
        if let Some(prev) = events.last() {
            let prev: &PhotonEvent = prev;
            if (ev.pulse_index, ev.timestamp_ps) < (prev.pulse_index, prev.timestamp_ps) {
                return Err(EventFileError::Unsorted {
                    path: display,
                    index,
                });
            }
        }
        events.push(ev);
    }

    Ok(EventFile {
        run: header.run,
        events,
    })
}

fn read_exact(
    input: &mut impl Read,
    buf: &mut [u8],
    path: &str,
    context: &str,
) -> Result<(), EventFileError> {
    input.read_exact(buf).map_err(|source| {
        if source.kind() == std::io::ErrorKind::UnexpectedEof {
            EventFileError::Truncated {
                path: path.to_string(),
                context: context.to_string(),
            }
        } else {
            EventFileError::Io {
                path: path.to_string(),
                source,
            }
        }
    })
}
