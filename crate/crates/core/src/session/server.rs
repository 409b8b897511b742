//! WebSocket host for one [`Session`].
//!
//! A single loop task owns the session. Connection readers, the 100 ms
//! ticker and the EEG producer thread only send it messages; it fans the
//! resulting envelopes out to per-connection writer queues, so each client
//! sees messages in the order the session produced them.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

use super::log::LogSink;
use super::protocol::{ClientMessage, ErrorCode, ServerMessage, SessionPhase};
use super::state::{Audience, ConnId, Envelope, Input, Session};
use crate::clock::{Clock, WallClock};
use crate::signal::{PipelineConfig, SignalError, WorkloadPipeline, WorkloadSample};
use crate::synth::{generate, EegRecording, GeneratorParams, Replay, SynthError, WorkloadScript};
use crate::task::{GameConfig, TaskError};

pub const TICK_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub enum EegSource {
    /// Generated EEG following `script`; without one, level 0 for the first
    /// third of the session and level 1 after.
    Synthetic { params: GeneratorParams, script: Option<WorkloadScript> },
    Replay(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub listen: String,
    pub eeg: EegSource,
    pub config: GameConfig,
    pub pipeline: PipelineConfig,
    pub sessions_dir: PathBuf,
    pub session_id: Option<String>,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("EEG replay file {path}: {source}")]
    Replay { path: PathBuf, source: SynthError },
    #[error(transparent)]
    Config(#[from] TaskError),
    #[error("EEG source: {0}")]
    Eeg(#[from] SynthError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] SignalError),
}

enum LoopMsg {
    Connected { conn: ConnId, tx: mpsc::UnboundedSender<String> },
    Text { conn: ConnId, text: String },
    Closed { conn: ConnId },
    Tick,
    Workload(WorkloadSample),
    Shutdown,
}

pub struct Server {
    listener: TcpListener,
    addr: SocketAddr,
    session_id: String,
    opts: ServeOptions,
    recording: Option<EegRecording>,
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Server {
    /// Validates everything that can fail before binding, then binds.
    pub async fn bind(opts: ServeOptions) -> Result<Self, ServeError> {
        opts.pipeline.validate()?;
        crate::task::generate_sequence(&opts.config)?;
        let recording = match &opts.eeg {
            EegSource::Replay(path) => Some(
                crate::synth::read_eeg_csv_file(path)
                    .map_err(|source| ServeError::Replay { path: path.clone(), source })?,
            ),
            EegSource::Synthetic { params, script } => {
                params.validate()?;
                if let Some(s) = script {
                    s.validate()?;
                }
                None
            }
        };
        let listener = TcpListener::bind(&opts.listen)
            .await
            .map_err(|e| ServeError::Bind { addr: opts.listen.clone(), reason: e.to_string() })?;
        let addr = listener.local_addr().map_err(|e| ServeError::Io(e.to_string()))?;
        let session_id = opts
            .session_id
            .clone()
            .unwrap_or_else(|| format!("session-{}-{}", opts.config.seed, unix_ms()));
        Ok(Self { listener, addr, session_id, opts, recording })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Serves until `shutdown` resolves, then flushes the log and returns.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<(), ServeError> {
        let session = Session::new(self.session_id.clone(), self.opts.config.clone(), unix_ms())?;
        let sink = LogSink::create(&self.opts.sessions_dir, &self.session_id).map_err(|e| ServeError::Io(e.to_string()))?;
        let (tx, rx) = mpsc::unbounded_channel();
        let producer = Producer { eeg: self.opts.eeg.clone(), recording: self.recording, pipeline: self.opts.pipeline.clone() };
        let loop_task = tokio::spawn(event_loop(session, sink, rx, tx.clone(), producer));

        let ticker_tx = tx.clone();
        let ticker = tokio::spawn(async move {
            let mut interval = tokio::time::interval(TICK_INTERVAL);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                interval.tick().await;
                if ticker_tx.send(LoopMsg::Tick).is_err() {
                    break;
                }
            }
        });

        tokio::pin!(shutdown);
        let mut next_conn: ConnId = 1;
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => {
                    if let Ok((stream, _)) = accepted {
                        tokio::spawn(handle_connection(stream, next_conn, tx.clone()));
                        next_conn += 1;
                    }
                }
            }
        }
        ticker.abort();
        let _ = tx.send(LoopMsg::Shutdown);
        loop_task.await.map_err(|e| ServeError::Io(e.to_string()))?
    }
}

async fn handle_connection(stream: TcpStream, conn: ConnId, loop_tx: mpsc::UnboundedSender<LoopMsg>) {
    let Ok(ws) = tokio_tungstenite::accept_async(stream).await else {
        return;
    };
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    if loop_tx.send(LoopMsg::Connected { conn, tx }).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(frame)) = source.next().await {
        match frame {
            Message::Text(text) => {
                if loop_tx.send(LoopMsg::Text { conn, text }).is_err() {
                    break;
                }
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = loop_tx.send(LoopMsg::Closed { conn });
    writer.abort();
}

struct Producer {
    eeg: EegSource,
    recording: Option<EegRecording>,
    pipeline: PipelineConfig,
}

impl Producer {
    /// Starts the EEG thread: chunks are released at wall-clock pace, run
    /// through the pipeline, and the samples posted to the loop.
    fn spawn(&self, duration_s: f64, tx: mpsc::UnboundedSender<LoopMsg>, stop: Arc<AtomicBool>) -> Result<(), ServeError> {
        let mut pipeline = WorkloadPipeline::new(self.pipeline.clone())?;
        let chunks: Box<dyn Iterator<Item = crate::signal::EegChunk> + Send> = match (&self.eeg, &self.recording) {
            (_, Some(rec)) => Box::new(Replay::new(rec, 25, false, 1.0, WallClock::new())),
            (EegSource::Synthetic { params, script }, None) => {
                let script = match script {
                    Some(s) => s.clone(),
                    None => WorkloadScript::step(duration_s / 3.0, duration_s)?,
                };
                Box::new(generate(script, params.clone())?)
            }
            (EegSource::Replay(path), None) => {
                return Err(ServeError::Io(format!("replay file {} not loaded", path.display())))
            }
        };
        std::thread::spawn(move || {
            let mut clock = WallClock::new();
            for chunk in chunks {
                clock.sleep_until(chunk.end_time_s());
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                match pipeline.push(&chunk) {
                    Ok(samples) => {
                        for s in samples {
                            if tx.send(LoopMsg::Workload(s)).is_err() {
                                return;
                            }
                        }
                    }
                    Err(e) => {
                        eprintln!("EEG pipeline stopped: {e}");
                        return;
                    }
                }
            }
        });
        Ok(())
    }
}

async fn event_loop(
    mut session: Session,
    mut sink: LogSink,
    mut rx: mpsc::UnboundedReceiver<LoopMsg>,
    self_tx: mpsc::UnboundedSender<LoopMsg>,
    producer: Producer,
) -> Result<(), ServeError> {
    let mut clients: HashMap<ConnId, mpsc::UnboundedSender<String>> = HashMap::new();
    let stop = Arc::new(AtomicBool::new(false));
    let mut last_tick: Option<Instant> = None;
    let io = |e: std::io::Error| ServeError::Io(e.to_string());

    while let Some(msg) = rx.recv().await {
        let was_running = session.phase() == SessionPhase::Running;
        let out = match msg {
            LoopMsg::Shutdown => break,
            LoopMsg::Connected { conn, tx } => {
                clients.insert(conn, tx);
                Vec::new()
            }
            LoopMsg::Closed { conn } => {
                clients.remove(&conn);
                session.apply(Input::Disconnect { conn })
            }
            LoopMsg::Text { conn, text } => match ClientMessage::from_json(&text) {
                Ok(message) => session.apply(Input::Inbound { conn, message }),
                Err(e) => vec![Envelope {
                    to: Audience::Conn(conn),
                    message: ServerMessage::Error {
                        clock_s: session.clock_s(),
                        code: ErrorCode::MalformedMessage,
                        message: e.to_string(),
                        issues: Vec::new(),
                    },
                }],
            },
            LoopMsg::Tick => match last_tick {
                Some(prev) if was_running => {
                    let now = Instant::now();
                    let dt_us = now.duration_since(prev).as_micros() as u64;
                    last_tick = Some(now);
                    session.apply(Input::Tick { dt_us })
                }
                _ => Vec::new(),
            },
            LoopMsg::Workload(sample) => session.apply(Input::Workload(sample)),
        };
        if !was_running && session.phase() == SessionPhase::Running {
            last_tick = Some(Instant::now());
            producer.spawn(session.config().session_duration_s, self_tx.clone(), stop.clone())?;
        }
        if was_running && session.phase() == SessionPhase::Finished {
            stop.store(true, Ordering::Relaxed);
        }
        sink.sync(&session).map_err(io)?;
        for env in out {
            let text = env.message.to_json();
            match env.to {
                Audience::Conn(c) => {
                    if let Some(tx) = clients.get(&c) {
                        let _ = tx.send(text);
                    }
                }
                Audience::Subscribers => {
                    for c in session.subscribers().keys() {
                        if let Some(tx) = clients.get(c) {
                            let _ = tx.send(text.clone());
                        }
                    }
                }
            }
        }
    }
    stop.store(true, Ordering::Relaxed);
    sink.sync(&session).map_err(io)
}
