//! Live session orchestration: the pure [`Session`] core, its replayable
//! log, and the WebSocket server that hosts it.

mod log;
mod protocol;
mod server;
mod state;

pub use log::{
    log_digest, read_log, read_log_file, replay_session, write_log, LogEntry, LogRecord, LogSink,
    ReplayError, LOG_FORMAT_VERSION,
};
pub use protocol::{
    ClientMessage, ErrorCode, PublicOrder, Role, ServerMessage, SessionPhase, SessionState,
};
pub use server::{EegSource, ServeError, ServeOptions, Server};
pub use state::{Audience, ConnId, Envelope, Input, Session};
