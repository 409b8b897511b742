//! The session core. Pure and single-threaded: every input goes through
//! [`Session::apply`], which logs it and returns the addressed outbound
//! messages. Networking and EEG production live elsewhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::log::{LogEntry, LogRecord, LOG_FORMAT_VERSION};
use super::protocol::{ClientMessage, ErrorCode, PublicOrder, Role, ServerMessage, SessionPhase, SessionState};
use crate::signal::WorkloadSample;
use crate::task::{
    generate_sequence, ConfigPatch, Effect, EndReason, GameConfig, GameEvent, GameMachine, GamePhase,
    OrderSequence, SessionScore, TaskError,
};

pub type ConnId = u64;

const US_PER_S: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    /// Every subscribed connection.
    Subscribers,
    Conn(ConnId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub to: Audience,
    pub message: ServerMessage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Inbound { conn: ConnId, message: ClientMessage },
    Disconnect { conn: ConnId },
    /// Advance the session clock by `dt_us` microseconds.
    Tick { dt_us: u64 },
    Workload(WorkloadSample),
}

impl Input {
    pub fn tick_s(dt_s: f64) -> Self {
        Input::Tick { dt_us: (dt_s * US_PER_S).round().max(0.0) as u64 }
    }

    pub(crate) fn to_entry(&self) -> LogEntry {
        match self {
            Input::Inbound { conn, message } => LogEntry::Inbound { conn: *conn, message: message.clone() },
            Input::Disconnect { conn } => LogEntry::Disconnect { conn: *conn },
            Input::Tick { dt_us } => LogEntry::Tick { dt_us: *dt_us },
            Input::Workload(sample) => LogEntry::Workload { sample: sample.clone() },
        }
    }

    pub(crate) fn from_entry(entry: &LogEntry) -> Option<Self> {
        Some(match entry {
            LogEntry::Inbound { conn, message } => Input::Inbound { conn: *conn, message: message.clone() },
            LogEntry::Disconnect { conn } => Input::Disconnect { conn: *conn },
            LogEntry::Tick { dt_us } => Input::Tick { dt_us: *dt_us },
            LogEntry::Workload { sample } => Input::Workload(sample.clone()),
            LogEntry::Header { .. } | LogEntry::Outbound { .. } => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    phase: SessionPhase,
    config: GameConfig,
    sequence: OrderSequence,
    machine: GameMachine,
    latest_workload: Option<WorkloadSample>,
    clock_us: u64,
    duration_us: u64,
    subscribers: BTreeMap<ConnId, Role>,
    player: Option<ConnId>,
    end_reason: Option<EndReason>,
    records: Vec<LogRecord>,
}

impl Session {
    /// A session in `Configuring` with `config` as its starting program.
    pub fn new(id: impl Into<String>, config: GameConfig, wall_clock_unix_ms: u64) -> Result<Self, TaskError> {
        let sequence = generate_sequence(&config)?;
        let id = id.into();
        let mut s = Self {
            phase: SessionPhase::Configuring,
            machine: GameMachine::new(sequence.clone()),
            duration_us: duration_us(&config),
            sequence,
            latest_workload: None,
            clock_us: 0,
            subscribers: BTreeMap::new(),
            player: None,
            end_reason: None,
            records: Vec::new(),
            id: id.clone(),
            config: config.clone(),
        };
        s.record(LogEntry::Header {
            session_id: id,
            format_version: LOG_FORMAT_VERSION,
            initial_config: config,
            wall_clock_unix_ms,
        });
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn sequence(&self) -> &OrderSequence {
        &self.sequence
    }

    pub fn machine(&self) -> &GameMachine {
        &self.machine
    }

    pub fn score(&self) -> &SessionScore {
        self.machine.score()
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.end_reason
    }

    pub fn clock_s(&self) -> f64 {
        self.clock_us as f64 / US_PER_S
    }

    pub fn clock_us(&self) -> u64 {
        self.clock_us
    }

    pub fn remaining_s(&self) -> f64 {
        self.duration_us.saturating_sub(self.clock_us) as f64 / US_PER_S
    }

    pub fn subscribers(&self) -> &BTreeMap<ConnId, Role> {
        &self.subscribers
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn latest_workload(&self) -> Option<&WorkloadSample> {
        self.latest_workload.as_ref()
    }

    pub fn state(&self) -> SessionState {
        let current_order = match self.machine.phase() {
            GamePhase::Presenting(i)
            | GamePhase::Judging(i)
            | GamePhase::SelectingDrink(i)
            | GamePhase::SelectingIngredients(i)
            | GamePhase::Feedback(i) => self.sequence.orders.get(i).map(PublicOrder::from),
            GamePhase::Idle | GamePhase::Finished => None,
        };
        SessionState {
            session_id: self.id.clone(),
            phase: self.phase,
            config: self.config.clone(),
            config_hash: self.sequence.config_hash.clone(),
            sequence_digest: self.sequence.digest(),
            order_count: self.sequence.len(),
            game_phase: self.machine.phase(),
            current_order,
            score: self.machine.score().clone(),
            latest_workload: self.latest_workload.clone(),
            clock_s: self.clock_s(),
            remaining_s: self.remaining_s(),
        }
    }

    /// Applies one input. Inputs that cannot change anything (zero ticks,
    /// ticks or samples outside `Running`, unknown disconnects) are dropped
    /// without a log entry.
    pub fn apply(&mut self, input: Input) -> Vec<Envelope> {
        if !self.is_effective(&input) {
            return Vec::new();
        }
        let entry = input.to_entry();
        let mut out = Vec::new();
        match input {
            Input::Inbound { conn, message } => self.on_message(conn, message, &mut out),
            Input::Disconnect { conn } => {
                self.subscribers.remove(&conn);
                if self.player == Some(conn) {
                    self.player = None;
                }
            }
            Input::Tick { dt_us } => self.on_tick(dt_us, &mut out),
            Input::Workload(sample) => {
                self.latest_workload = Some(sample.clone());
                out.push(self.to_all(ServerMessage::WorkloadUpdate { clock_s: self.clock_s(), sample }));
            }
        }
        // the input is stamped with the clock it produced
        self.record(entry);
        for env in &out {
            self.record(LogEntry::Outbound { to: env.to, message: env.message.clone() });
        }
        out
    }

    fn is_effective(&self, input: &Input) -> bool {
        match input {
            Input::Inbound { .. } => true,
            Input::Disconnect { conn } => self.subscribers.contains_key(conn),
            Input::Tick { dt_us } => *dt_us > 0 && self.phase == SessionPhase::Running,
            Input::Workload(_) => self.phase == SessionPhase::Running,
        }
    }

    fn record(&mut self, entry: LogEntry) {
        self.records.push(LogRecord {
            seq: self.records.len() as u64,
            clock_s: self.clock_s(),
            entry,
        });
    }

    fn to_all(&self, message: ServerMessage) -> Envelope {
        Envelope { to: Audience::Subscribers, message }
    }

    /// Broadcast, plus a direct copy if `conn` is not subscribed.
    fn to_all_and(&self, conn: ConnId, message: ServerMessage, out: &mut Vec<Envelope>) {
        if !self.subscribers.contains_key(&conn) {
            out.push(Envelope { to: Audience::Conn(conn), message: message.clone() });
        }
        out.push(self.to_all(message));
    }

    fn error(&self, conn: ConnId, code: ErrorCode, message: String) -> Envelope {
        Envelope {
            to: Audience::Conn(conn),
            message: ServerMessage::Error { clock_s: self.clock_s(), code, message, issues: Vec::new() },
        }
    }

    fn phase_changed(&self) -> ServerMessage {
        ServerMessage::PhaseChanged {
            clock_s: self.clock_s(),
            session_phase: self.phase,
            game_phase: self.machine.phase(),
        }
    }

    fn on_message(&mut self, conn: ConnId, message: ClientMessage, out: &mut Vec<Envelope>) {
        if message.session_id() != self.id {
            out.push(self.error(
                conn,
                ErrorCode::WrongSession,
                format!("this is session '{}', not '{}'", self.id, message.session_id()),
            ));
            return;
        }
        match message {
            ClientMessage::Subscribe { role, .. } => self.on_subscribe(conn, role, out),
            ClientMessage::SetConfig { patch, .. } => self.on_set_config(conn, &patch, out),
            ClientMessage::StartSession { .. } => self.on_start(conn, out),
            ClientMessage::SubmitJudgment { judgment, .. } => {
                self.on_player_event(conn, GameEvent::SubmitJudgment(judgment), out)
            }
            ClientMessage::SubmitDrink { drink, .. } => self.on_player_event(conn, GameEvent::SubmitDrink(drink), out),
            ClientMessage::SubmitIngredients { ingredients, .. } => {
                self.on_player_event(conn, GameEvent::SubmitIngredients(ingredients), out)
            }
        }
    }

    fn on_subscribe(&mut self, conn: ConnId, role: Role, out: &mut Vec<Envelope>) {
        if role == Role::Player {
            if let Some(p) = self.player.filter(|p| *p != conn) {
                out.push(self.error(conn, ErrorCode::PlayerTaken, format!("connection {p} is already the player")));
                return;
            }
            self.player = Some(conn);
        } else if self.player == Some(conn) {
            self.player = None;
        }
        self.subscribers.insert(conn, role);
        out.push(Envelope {
            to: Audience::Conn(conn),
            message: ServerMessage::StateSnapshot { clock_s: self.clock_s(), state: self.state() },
        });
    }

    fn on_set_config(&mut self, conn: ConnId, patch: &ConfigPatch, out: &mut Vec<Envelope>) {
        if self.phase != SessionPhase::Configuring {
            out.push(self.error(conn, ErrorCode::ConfigLocked, "configuration is frozen once the session starts".into()));
            return;
        }
        let candidate = patch.apply_to(&self.config);
        match generate_sequence(&candidate) {
            Ok(sequence) => {
                self.duration_us = duration_us(&candidate);
                self.machine = GameMachine::new(sequence.clone());
                self.sequence = sequence;
                self.config = candidate;
                let ack = ServerMessage::ConfigAck {
                    clock_s: self.clock_s(),
                    config: self.config.clone(),
                    config_hash: self.sequence.config_hash.clone(),
                    sequence_digest: self.sequence.digest(),
                };
                self.to_all_and(conn, ack, out);
            }
            Err(e) => {
                let issues = match &e {
                    TaskError::ConfigInvalid(issues) => issues.clone(),
                    _ => Vec::new(),
                };
                out.push(Envelope {
                    to: Audience::Conn(conn),
                    message: ServerMessage::Error {
                        clock_s: self.clock_s(),
                        code: ErrorCode::ConfigInvalid,
                        message: e.to_string(),
                        issues,
                    },
                });
            }
        }
    }

    fn on_start(&mut self, conn: ConnId, out: &mut Vec<Envelope>) {
        if self.phase != SessionPhase::Configuring {
            out.push(self.error(conn, ErrorCode::AlreadyRunning, "the session has already been started".into()));
            return;
        }
        self.phase = SessionPhase::Running;
        let effects = self.machine.advance(GameEvent::PresentNext, self.clock_s()).expect("idle accepts PresentNext");
        self.emit_effects(effects, out);
        out.push(self.to_all(ServerMessage::CountdownTick {
            clock_s: self.clock_s(),
            remaining_s: self.remaining_s(),
        }));
    }

    fn on_player_event(&mut self, conn: ConnId, event: GameEvent, out: &mut Vec<Envelope>) {
        if self.phase != SessionPhase::Running {
            let what = if self.phase == SessionPhase::Configuring { "not started" } else { "over" };
            out.push(self.error(conn, ErrorCode::NotRunning, format!("the session is {what}")));
            return;
        }
        if self.player != Some(conn) {
            out.push(self.error(conn, ErrorCode::NotPlayer, "only the subscribed player may answer".into()));
            return;
        }
        match self.machine.advance(event, self.clock_s()) {
            Ok(effects) => {
                out.push(self.to_all(self.phase_changed()));
                self.emit_effects(effects, out);
            }
            Err(e) => out.push(self.error(conn, ErrorCode::IllegalTransition, e.to_string())),
        }
    }

    /// Turns machine effects into broadcasts. Presentation and feedback are
    /// instantaneous on the server: a presented order moves straight to
    /// `Judging`, and feedback hands over to the next order at once.
    fn emit_effects(&mut self, effects: Vec<Effect>, out: &mut Vec<Envelope>) {
        for effect in effects {
            match effect {
                Effect::OrderPresented(i) => {
                    let order = PublicOrder::from(&self.sequence.orders[i]);
                    out.push(self.to_all(ServerMessage::OrderPresented { clock_s: self.clock_s(), order }));
                    let more = self.machine.advance(GameEvent::PresentNext, self.clock_s()).expect("presenting accepts PresentNext");
                    out.push(self.to_all(self.phase_changed()));
                    self.emit_effects(more, out);
                }
                Effect::Outcome(outcome) => {
                    out.push(self.to_all(ServerMessage::TrialFeedback { clock_s: self.clock_s(), outcome }));
                    out.push(self.to_all(ServerMessage::ScoreUpdate {
                        clock_s: self.clock_s(),
                        score: self.machine.score().clone(),
                    }));
                    let more = self.machine.advance(GameEvent::FeedbackDone, self.clock_s()).expect("feedback accepts FeedbackDone");
                    self.emit_effects(more, out);
                }
                Effect::Finished { score, reason } => {
                    self.phase = SessionPhase::Finished;
                    self.end_reason = Some(reason);
                    out.push(self.to_all(self.phase_changed()));
                    out.push(self.to_all(ServerMessage::SessionEnd { clock_s: self.clock_s(), score, reason }));
                }
            }
        }
    }

    /// Countdown ticks fire at every whole second crossed and once more at
    /// expiry; the clock stops at the session duration.
    fn on_tick(&mut self, dt_us: u64, out: &mut Vec<Envelope>) {
        let before = self.clock_us;
        let after = before.saturating_add(dt_us).min(self.duration_us);
        self.clock_us = after;
        let mut k = before / 1_000_000 + 1;
        while k * 1_000_000 <= after && k * 1_000_000 < self.duration_us {
            out.push(self.to_all(ServerMessage::CountdownTick {
                clock_s: self.clock_s(),
                remaining_s: (self.duration_us - k * 1_000_000) as f64 / US_PER_S,
            }));
            k += 1;
        }
        if after == self.duration_us && before < self.duration_us {
            out.push(self.to_all(ServerMessage::CountdownTick { clock_s: self.clock_s(), remaining_s: 0.0 }));
            let effects = self.machine.advance(GameEvent::ClockExpired, self.clock_s()).expect("running accepts ClockExpired");
            self.emit_effects(effects, out);
        }
    }
}

fn duration_us(config: &GameConfig) -> u64 {
    (config.session_duration_s * US_PER_S).round() as u64
}
