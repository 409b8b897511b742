//! Session log: one JSON object per line in `sessions/<id>.jsonl`.
//!
//! The first record is a header carrying the starting config. Every applied
//! input follows with the outbound envelopes it produced, so re-applying the
//! inputs to a fresh [`Session`] must regenerate the outbound records
//! exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::protocol::{ClientMessage, ServerMessage, SessionState};
use super::state::{Audience, ConnId, Input, Session};
use crate::signal::WorkloadSample;
use crate::task::GameConfig;

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Header {
        session_id: String,
        format_version: u32,
        initial_config: GameConfig,
        /// Wall-clock metadata; ignored by replay and the canonical digest.
        wall_clock_unix_ms: u64,
    },
    Inbound {
        conn: ConnId,
        message: ClientMessage,
    },
    Disconnect {
        conn: ConnId,
    },
    Tick {
        dt_us: u64,
    },
    Workload {
        sample: WorkloadSample,
    },
    Outbound {
        to: Audience,
        message: ServerMessage,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub clock_s: f64,
    #[serde(flatten)]
    pub entry: LogEntry,
}

impl LogRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    fn canonical_json(&self) -> String {
        match &self.entry {
            LogEntry::Header { session_id, format_version, initial_config, .. } => LogRecord {
                entry: LogEntry::Header {
                    session_id: session_id.clone(),
                    format_version: *format_version,
                    initial_config: initial_config.clone(),
                    wall_clock_unix_ms: 0,
                },
                ..self.clone()
            }
            .to_json(),
            _ => self.to_json(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("session log corrupt at record {position}: {reason}")]
    LogCorrupt { position: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

fn corrupt(position: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError::LogCorrupt { position, reason: reason.into() }
}

/// SHA-256 over the canonical JSON lines, wall-clock metadata zeroed.
pub fn log_digest(records: &[LogRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.canonical_json().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_log<W: Write>(out: W, records: &[LogRecord]) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        writeln!(out, "{}", r.to_json())?;
    }
    out.flush()
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRecord>, ReplayError> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| ReplayError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord =
            serde_json::from_str(&line).map_err(|e| corrupt(records.len(), format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_log_file(path: &Path) -> Result<Vec<LogRecord>, ReplayError> {
    let f = File::open(path).map_err(|e| ReplayError::Io(format!("{}: {e}", path.display())))?;
    read_log(f)
}

/// Appends a session's new records to its JSONL file as they appear.
pub struct LogSink {
    path: PathBuf,
    out: BufWriter<File>,
    written: usize,
}

impl LogSink {
    /// Creates `dir/<session_id>.jsonl`, creating `dir` if needed.
    pub fn create(dir: &Path, session_id: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{session_id}.jsonl"));
        Ok(Self { out: BufWriter::new(File::create(&path)?), path, written: 0 })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn sync(&mut self, session: &Session) -> std::io::Result<()> {
        for r in &session.records()[self.written..] {
            writeln!(self.out, "{}", r.to_json())?;
        }
        self.written = session.records().len();
        self.out.flush()
    }
}

/// Re-applies every input to a fresh session and checks that each logged
/// outbound record is reproduced exactly and in order.
pub fn replay_session(records: &[LogRecord]) -> Result<SessionState, ReplayError> {
    let Some(first) = records.first() else {
        return Err(corrupt(0, "empty log"));
    };
    let LogEntry::Header { session_id, format_version, initial_config, wall_clock_unix_ms } = &first.entry else {
        return Err(corrupt(0, "first record is not a header"));
    };
    if *format_version != LOG_FORMAT_VERSION {
        return Err(corrupt(0, format!("unsupported log format {format_version}")));
    }
    let mut session = Session::new(session_id.clone(), initial_config.clone(), *wall_clock_unix_ms)
        .map_err(|e| corrupt(0, format!("initial config rejected: {e}")))?;

    let mut pending: std::collections::VecDeque<super::state::Envelope> = Default::default();
    for (pos, rec) in records.iter().enumerate() {
        if rec.seq != pos as u64 {
            return Err(corrupt(pos, format!("sequence number {} out of order", rec.seq)));
        }
        if pos == 0 {
            continue;
        }
        match &rec.entry {
            LogEntry::Header { .. } => return Err(corrupt(pos, "second header")),
            LogEntry::Outbound { to, message } => {
                let Some(expected) = pending.pop_front() else {
                    return Err(corrupt(pos, format!("unexpected outbound '{}'", message.kind())));
                };
                if expected.to != *to || expected.message != *message {
                    return Err(corrupt(
                        pos,
                        format!("expected {}, logged {}", expected.message.to_json(), message.to_json()),
                    ));
                }
            }
            entry => {
                if let Some(missing) = pending.front() {
                    return Err(corrupt(pos, format!("missing outbound '{}'", missing.message.kind())));
                }
                let input = Input::from_entry(entry).expect("input entry");
                let before = session.records().len();
                let produced = session.apply(input);
                let Some(replayed) = session.records().get(before) else {
                    return Err(corrupt(pos, "input has no effect, so it cannot have been logged"));
                };
                if replayed.clock_s != rec.clock_s {
                    return Err(corrupt(pos, format!("clock {} does not match replayed {}", rec.clock_s, replayed.clock_s)));
                }
                pending.extend(produced);
            }
        }
    }
    if let Some(missing) = pending.front() {
        return Err(corrupt(records.len(), format!("log ends before outbound '{}'", missing.message.kind())));
    }
    Ok(session.state())
}
