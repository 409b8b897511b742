//! C ABI over the pizza-mwl engines.
//!
//! Every fallible call returns a [`PmwlStatus`]; on failure a message is
//! kept per thread and read with [`pmwl_last_error`]. Handles are opaque
//! and owned by the caller until passed to their `_free` function. Strings
//! returned through `char **out` are UTF-8 JSON owned by the caller and
//! released with [`pmwl_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pizza_mwl::session::{read_log, replay_session, ClientMessage, Input, Session};
use pizza_mwl::signal::{EegChunk, PipelineConfig, WorkloadPipeline, WorkloadSample};
use pizza_mwl::task::{generate_sequence, GameConfig, OrderSequence, TaskError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmwlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    ConfigInvalid = 4,
    InvalidArgument = 5,
    SignalError = 6,
    LogCorrupt = 7,
    Panic = 8,
}

/// Order program for one config.
pub struct PmwlSequence {
    inner: OrderSequence,
}

/// Streaming workload pipeline.
pub struct PmwlPipeline {
    inner: WorkloadPipeline,
}

/// Pure session core: feed it inputs, get envelopes back.
pub struct PmwlSession {
    inner: Session,
}

type Failure = (PmwlStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PmwlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PmwlStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PmwlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (PmwlStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|e| (PmwlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_json(out: *mut *mut c_char, json: String) -> Result<(), Failure> {
    let c = CString::new(json).map_err(|e| (PmwlStatus::InvalidArgument, e.to_string()))?;
    write_out(out, c.into_raw())
}

fn task_failure(e: TaskError) -> Failure {
    let status = match e {
        TaskError::ConfigInvalid(_) => PmwlStatus::ConfigInvalid,
        _ => PmwlStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn parse_config(json: Option<&str>) -> Result<GameConfig, Failure> {
    match json {
        None => Ok(GameConfig::default()),
        Some(j) => serde_json::from_str(j).map_err(|e| (PmwlStatus::InvalidJson, format!("game config: {e}"))),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data")
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn pmwl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pmwl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static version string; do not free.
#[no_mangle]
pub extern "C" fn pmwl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the order program. `config_json` may be NULL for defaults;
/// absent fields take defaults.
///
/// # Safety
/// `config_json` is NULL or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_sequence_generate(config_json: *const c_char, out: *mut *mut PmwlSequence) -> PmwlStatus {
    guard(|| {
        let config = parse_config(opt_str(config_json, "config_json")?)?;
        let inner = generate_sequence(&config).map_err(task_failure)?;
        write_out(out, Box::into_raw(Box::new(PmwlSequence { inner })))
    })
}

/// Number of orders; 0 for NULL.
///
/// # Safety
/// `seq` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmwl_sequence_len(seq: *const PmwlSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `seq` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_sequence_is_target(seq: *const PmwlSequence, index: usize, out: *mut bool) -> PmwlStatus {
    guard(|| {
        let seq = seq.as_ref().ok_or_else(|| null("seq"))?;
        let t = pizza_mwl::task::is_target(&seq.inner, index).map_err(task_failure)?;
        write_out(out, t)
    })
}

/// The full program (config, hash, orders) as JSON.
///
/// # Safety
/// `seq` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_sequence_to_json(seq: *const PmwlSequence, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| {
        let seq = seq.as_ref().ok_or_else(|| null("seq"))?;
        write_json(out, to_json(&seq.inner))
    })
}

/// # Safety
/// `seq` is NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmwl_sequence_free(seq: *mut PmwlSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Streaming pipeline. `config_json` may be NULL for defaults; otherwise a
/// complete pipeline config object.
///
/// # Safety
/// `config_json` is NULL or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_pipeline_new(config_json: *const c_char, out: *mut *mut PmwlPipeline) -> PmwlStatus {
    guard(|| {
        let config = match opt_str(config_json, "config_json")? {
            None => PipelineConfig::default(),
            Some(j) => serde_json::from_str(j).map_err(|e| (PmwlStatus::InvalidJson, format!("pipeline config: {e}")))?,
        };
        let inner = WorkloadPipeline::new(config).map_err(|e| (PmwlStatus::SignalError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(PmwlPipeline { inner })))
    })
}

/// Pushes `channels × frames` samples in microvolts, channel-major
/// (`samples[c * frames + i]`), starting at `start_time_s`. Writes a JSON
/// array of the workload samples completed by this chunk.
///
/// # Safety
/// `pipe` is a live handle; `samples` points to `channels * frames`
/// doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_pipeline_push(
    pipe: *mut PmwlPipeline,
    samples: *const f64,
    channels: usize,
    frames: usize,
    start_time_s: f64,
    out: *mut *mut c_char,
) -> PmwlStatus {
    guard(|| {
        let pipe = pipe.as_mut().ok_or_else(|| null("pipe"))?;
        if samples.is_null() {
            return Err(null("samples"));
        }
        let total = channels.checked_mul(frames).ok_or((PmwlStatus::InvalidArgument, "size overflow".into()))?;
        let flat = std::slice::from_raw_parts(samples, total);
        let rows: Vec<Vec<f64>> = if frames == 0 {
            vec![Vec::new(); channels]
        } else {
            flat.chunks(frames).map(<[f64]>::to_vec).collect()
        };
        let fs = pipe.inner.config().sampling_rate_hz;
        let chunk = EegChunk::new(start_time_s, fs, rows).map_err(|e| (PmwlStatus::SignalError, e.to_string()))?;
        let produced = pipe.inner.push(&chunk).map_err(|e| (PmwlStatus::SignalError, e.to_string()))?;
        write_json(out, to_json(&produced))
    })
}

/// # Safety
/// `pipe` is NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmwl_pipeline_free(pipe: *mut PmwlPipeline) {
    if !pipe.is_null() {
        drop(Box::from_raw(pipe));
    }
}

/// New session in the configuring phase. `config_json` may be NULL.
///
/// # Safety
/// `session_id` is a NUL-terminated string; `config_json` is NULL or one;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_new(
    session_id: *const c_char,
    config_json: *const c_char,
    wall_clock_unix_ms: u64,
    out: *mut *mut PmwlSession,
) -> PmwlStatus {
    guard(|| {
        let id = req_str(session_id, "session_id")?;
        let config = parse_config(opt_str(config_json, "config_json")?)?;
        let inner = Session::new(id, config, wall_clock_unix_ms).map_err(task_failure)?;
        write_out(out, Box::into_raw(Box::new(PmwlSession { inner })))
    })
}

unsafe fn apply(session: *mut PmwlSession, input: Input, out: *mut *mut c_char) -> Result<(), Failure> {
    let session = session.as_mut().ok_or_else(|| null("session"))?;
    let envelopes = session.inner.apply(input);
    write_json(out, to_json(&envelopes))
}

/// Applies one client message from connection `conn`. Writes the
/// resulting envelopes as a JSON array of `{"to", "message"}`. Protocol
/// errors are envelopes, not failures; only unparsable JSON fails.
///
/// # Safety
/// `session` is a live handle; `message_json` is a NUL-terminated string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_handle_message(
    session: *mut PmwlSession,
    conn: u64,
    message_json: *const c_char,
    out: *mut *mut c_char,
) -> PmwlStatus {
    guard(|| {
        let text = req_str(message_json, "message_json")?;
        let message = ClientMessage::from_json(text).map_err(|e| (PmwlStatus::InvalidJson, e.to_string()))?;
        apply(session, Input::Inbound { conn, message }, out)
    })
}

/// Advances the session clock by `dt_us` microseconds.
///
/// # Safety
/// `session` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_tick(session: *mut PmwlSession, dt_us: u64, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| apply(session, Input::Tick { dt_us }, out))
}

/// Feeds one workload sample (as produced by the pipeline) to the session.
///
/// # Safety
/// `session` is a live handle; `sample_json` is a NUL-terminated string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_workload(
    session: *mut PmwlSession,
    sample_json: *const c_char,
    out: *mut *mut c_char,
) -> PmwlStatus {
    guard(|| {
        let text = req_str(sample_json, "sample_json")?;
        let sample: WorkloadSample =
            serde_json::from_str(text).map_err(|e| (PmwlStatus::InvalidJson, format!("workload sample: {e}")))?;
        apply(session, Input::Workload(sample), out)
    })
}

/// # Safety
/// `session` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_disconnect(session: *mut PmwlSession, conn: u64, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| apply(session, Input::Disconnect { conn }, out))
}

/// Public session state as JSON.
///
/// # Safety
/// `session` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_state(session: *const PmwlSession, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| {
        let session = session.as_ref().ok_or_else(|| null("session"))?;
        write_json(out, to_json(&session.inner.state()))
    })
}

/// The session log so far, one JSON record per line.
///
/// # Safety
/// `session` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_log(session: *const PmwlSession, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| {
        let session = session.as_ref().ok_or_else(|| null("session"))?;
        let mut buf = Vec::new();
        pizza_mwl::session::write_log(&mut buf, session.inner.records())
            .map_err(|e| (PmwlStatus::InvalidArgument, e.to_string()))?;
        write_json(out, String::from_utf8(buf).expect("JSON is UTF-8"))
    })
}

/// # Safety
/// `session` is NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pmwl_session_free(session: *mut PmwlSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Replays a JSON-lines session log and writes the final state. Fails with
/// `LOG_CORRUPT` when any recorded output is not reproduced.
///
/// # Safety
/// `log_jsonl` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pmwl_replay_log(log_jsonl: *const c_char, out: *mut *mut c_char) -> PmwlStatus {
    guard(|| {
        let text = req_str(log_jsonl, "log_jsonl")?;
        let records = read_log(text.as_bytes()).map_err(|e| (PmwlStatus::LogCorrupt, e.to_string()))?;
        let state = replay_session(&records).map_err(|e| (PmwlStatus::LogCorrupt, e.to_string()))?;
        write_json(out, to_json(&state))
    })
}
