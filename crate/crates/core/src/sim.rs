//! Headless full session: synthetic EEG, the live pipeline and a seeded
//! virtual player, all driven by a discrete-event loop on simulated time.
//!
//! EEG arrives in 0.1 s chunks and each chunk is processed at its last
//! sample's timestamp, so a workload sample is published at the session
//! time its epoch completes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{
    log_digest, ClientMessage, Input, LogEntry, LogRecord, Role, ServerMessage, Session, SessionPhase,
};
use crate::signal::{PipelineConfig, SignalError, WorkloadClass, WorkloadPipeline};
use crate::synth::{generate, GeneratorParams, SynthError, WorkloadScript};
use crate::task::{EndReason, GameConfig, GamePhase, Judgment, Order, SessionScore, TaskError};

pub const PLAYER_LATENCY_S: (f64, f64) = (0.8, 2.5);
/// Epochs this close to a level change are left out of the confusion matrix.
pub const TRANSITION_EXCLUSION_S: f64 = 5.0;
/// Ground truth is overload at or above this scripted level.
pub const OVERLOAD_LEVEL: f64 = 0.5;
pub const PLAYER_CONN: u64 = 1;

const PLAYER_STREAM: u64 = 7;
const US_PER_S: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("player accuracy {0} outside [0, 1]")]
    InvalidAccuracy(f64),
    #[error(transparent)]
    Config(#[from] TaskError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub script: WorkloadScript,
    pub config: GameConfig,
    pub player_accuracy: f64,
    pub generator: GeneratorParams,
    pub pipeline: PipelineConfig,
    pub session_id: String,
    pub wall_clock_unix_ms: u64,
}

impl SimulationOptions {
    /// `seed` drives the order program, the EEG and the player alike.
    pub fn new(script: WorkloadScript, config: GameConfig, player_accuracy: f64, seed: u64) -> Self {
        Self {
            script,
            config: GameConfig { seed, ..config },
            player_accuracy,
            generator: GeneratorParams { seed, ..GeneratorParams::default() },
            pipeline: PipelineConfig::default(),
            session_id: format!("sim-{seed}"),
            wall_clock_unix_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub end_time_s: f64,
    pub published_at_s: f64,
    pub index: f64,
    pub relative_index: Option<f64>,
    pub class: WorkloadClass,
    pub truth: WorkloadClass,
    pub artifact: bool,
    pub calibrated: bool,
    /// Counted in the confusion matrix.
    pub scored: bool,
}

/// Rows are ground truth, columns the emitted class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub nominal_as_nominal: u32,
    pub nominal_as_overload: u32,
    pub overload_as_nominal: u32,
    pub overload_as_overload: u32,
}

impl Confusion {
    pub fn add(&mut self, truth: WorkloadClass, class: WorkloadClass) {
        use WorkloadClass::*;
        match (truth, class) {
            (Nominal, Nominal) => self.nominal_as_nominal += 1,
            (Nominal, Overload) => self.nominal_as_overload += 1,
            (Overload, Nominal) => self.overload_as_nominal += 1,
            (Overload, Overload) => self.overload_as_overload += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.nominal_as_nominal + self.nominal_as_overload + self.overload_as_nominal + self.overload_as_overload
    }

    pub fn correct(&self) -> u32 {
        self.nominal_as_nominal + self.overload_as_overload
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.correct() as f64 / self.total() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub session_id: String,
    pub score: SessionScore,
    pub end_reason: Option<EndReason>,
    pub session_duration_s: f64,
    pub workload_updates: usize,
    pub max_workload_latency_s: f64,
    pub confusion: Confusion,
    pub scored_epochs: u32,
    pub accuracy: Option<f64>,
    pub log_digest: String,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub summary: SimulationSummary,
    pub records: Vec<LogRecord>,
}

pub fn ground_truth(script: &WorkloadScript, t: f64) -> WorkloadClass {
    if script.target_level(t) >= OVERLOAD_LEVEL {
        WorkloadClass::Overload
    } else {
        WorkloadClass::Nominal
    }
}

/// Seeded stand-in for the human: each sub-response is right with
/// probability `accuracy`, answered after a uniform 0.8–2.5 s delay.
struct VirtualPlayer {
    accuracy: f64,
    rng: ChaCha8Rng,
}

impl VirtualPlayer {
    fn latency_us(&mut self) -> u64 {
        (self.rng.gen_range(PLAYER_LATENCY_S.0..=PLAYER_LATENCY_S.1) * US_PER_S).round() as u64
    }

    fn right(&mut self) -> bool {
        self.rng.gen_bool(self.accuracy)
    }

    fn respond(&mut self, phase: GamePhase, order: &Order, config: &GameConfig, session_id: &str) -> Option<ClientMessage> {
        let session_id = session_id.to_string();
        let right = self.right();
        Some(match phase {
            GamePhase::Judging(_) => {
                let yes = order.is_target == right;
                ClientMessage::SubmitJudgment { session_id, judgment: if yes { Judgment::Yes } else { Judgment::No } }
            }
            GamePhase::SelectingDrink(_) => {
                let drink = if right {
                    order.drink.clone()
                } else {
                    let others: Vec<&String> = config.drink_vocab.iter().filter(|d| **d != order.drink).collect();
                    (*others.choose(&mut self.rng).expect("vocab has another drink")).clone()
                };
                ClientMessage::SubmitDrink { session_id, drink }
            }
            GamePhase::SelectingIngredients(_) => {
                let mut ingredients = order.ingredients.clone();
                if !right {
                    let spare: Vec<&String> =
                        config.ingredient_vocab.iter().filter(|i| !ingredients.contains(i)).collect();
                    let slot = self.rng.gen_range(0..ingredients.len());
                    match spare.choose(&mut self.rng) {
                        Some(s) => ingredients[slot] = (*s).clone(),
                        None => {
                            ingredients.remove(slot);
                        }
                    }
                }
                ClientMessage::SubmitIngredients { session_id, ingredients }
            }
            _ => return None,
        })
    }
}

fn awaiting_player(phase: GamePhase) -> Option<usize> {
    match phase {
        GamePhase::Judging(i) | GamePhase::SelectingDrink(i) | GamePhase::SelectingIngredients(i) => Some(i),
        _ => None,
    }
}

pub fn simulate(opts: &SimulationOptions) -> Result<SimulationRun, SimError> {
    if !(0.0..=1.0).contains(&opts.player_accuracy) {
        return Err(SimError::InvalidAccuracy(opts.player_accuracy));
    }
    opts.script.validate()?;
    let mut session = Session::new(opts.session_id.clone(), opts.config.clone(), opts.wall_clock_unix_ms)?;
    let duration_s = opts.config.session_duration_s;
    let duration_us = (duration_s * US_PER_S).round() as u64;
    // the EEG covers the whole session
    let script = WorkloadScript { duration_s, ..opts.script.clone() };
    let mut eeg = generate(script.clone(), opts.generator.clone())?.peekable();
    let mut pipeline = WorkloadPipeline::new(opts.pipeline.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.config.seed);
    rng.set_stream(PLAYER_STREAM);
    let mut player = VirtualPlayer { accuracy: opts.player_accuracy, rng };

    let sid = opts.session_id.clone();
    session.apply(Input::Inbound {
        conn: PLAYER_CONN,
        message: ClientMessage::Subscribe { session_id: sid.clone(), role: Role::Player },
    });
    session.apply(Input::Inbound { conn: PLAYER_CONN, message: ClientMessage::StartSession { session_id: sid.clone() } });

    // (due time, phase the action answers)
    let mut pending: Option<(u64, GamePhase)> = None;
    while session.phase() == SessionPhase::Running {
        let phase = session.machine().phase();
        if awaiting_player(phase).is_some() && pending.map(|p| p.1) != Some(phase) {
            pending = Some((session.clock_us() + player.latency_us(), phase));
        }
        let next_eeg = eeg.peek().map(|c| (c.end_time_s() * US_PER_S).round() as u64);
        let next_player = pending.map(|p| p.0);
        let t = [next_eeg, next_player, Some(duration_us)].into_iter().flatten().min().expect("duration bound");
        if t > session.clock_us() {
            session.apply(Input::Tick { dt_us: t - session.clock_us() });
            if session.phase() != SessionPhase::Running {
                break;
            }
        }
        if next_eeg == Some(t) {
            let chunk = eeg.next().expect("peeked");
            for sample in pipeline.push(&chunk)? {
                session.apply(Input::Workload(sample));
            }
        }
        if next_player == Some(t) {
            let (_, phase) = pending.take().expect("scheduled");
            let i = awaiting_player(phase).expect("player phase");
            let order = session.sequence().orders[i].clone();
            if let Some(message) = player.respond(phase, &order, session.config(), &sid) {
                session.apply(Input::Inbound { conn: PLAYER_CONN, message });
            }
        }
        if next_eeg.is_none() && next_player.is_none() && t >= duration_us {
            break;
        }
    }

    let records = session.records().to_vec();
    let summary = summarize(&session, &script, &records);
    Ok(SimulationRun { summary, records })
}

fn near_transition(script: &WorkloadScript, t: f64) -> bool {
    script.transitions().any(|tr| (t - tr).abs() <= TRANSITION_EXCLUSION_S)
}

fn summarize(session: &Session, script: &WorkloadScript, records: &[LogRecord]) -> SimulationSummary {
    let mut epochs = Vec::new();
    let mut confusion = Confusion::default();
    let mut max_latency: f64 = 0.0;
    for r in records {
        let LogEntry::Outbound { message: ServerMessage::WorkloadUpdate { clock_s, sample }, .. } = &r.entry else {
            continue;
        };
        let truth = ground_truth(script, sample.end_time_s);
        let scored = sample.calibrated && !sample.artifact && !near_transition(script, sample.end_time_s);
        if scored {
            confusion.add(truth, sample.class);
        }
        max_latency = max_latency.max(clock_s - sample.end_time_s);
        epochs.push(EpochRecord {
            end_time_s: sample.end_time_s,
            published_at_s: *clock_s,
            index: sample.index,
            relative_index: sample.relative_index,
            class: sample.class,
            truth,
            artifact: sample.artifact,
            calibrated: sample.calibrated,
            scored,
        });
    }
    SimulationSummary {
        session_id: session.id().to_string(),
        score: session.score().clone(),
        end_reason: session.end_reason(),
        session_duration_s: session.config().session_duration_s,
        workload_updates: epochs.len(),
        max_workload_latency_s: max_latency,
        confusion,
        scored_epochs: confusion.total(),
        accuracy: confusion.accuracy(),
        log_digest: log_digest(records),
        epochs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::replay_session;

    fn short(accuracy: f64, seed: u64) -> SimulationOptions {
        let config = GameConfig { session_duration_s: 40.0, ..GameConfig::default() };
        SimulationOptions::new(WorkloadScript::step(25.0, 40.0).unwrap(), config, accuracy, seed)
    }

    #[test]
    fn perfect_and_hopeless_players() {
        let good = simulate(&short(1.0, 3)).unwrap().summary;
        assert!(good.score.orders_completed > 0);
        assert_eq!(good.score.orders_correct, good.score.orders_completed);
        let bad = simulate(&short(0.0, 3)).unwrap().summary;
        assert!(bad.score.orders_completed > 0);
        assert_eq!(bad.score.orders_correct, 0);
        assert_eq!(bad.score.judgment_hits, 0);
    }

    #[test]
    fn session_runs_to_the_clock() {
        let run = simulate(&short(0.8, 1)).unwrap();
        assert_eq!(run.summary.end_reason, Some(EndReason::Clock));
        // epochs end at 2.0, 2.5, ... 39.5; the one completing at 40 s meets the session end
        assert_eq!(run.summary.workload_updates, 76);
        assert_eq!(run.summary.max_workload_latency_s, 0.0);
        let state = replay_session(&run.records).unwrap();
        assert_eq!(state.score, run.summary.score);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate(&short(0.7, 9)).unwrap().summary;
        let b = simulate(&SimulationOptions { wall_clock_unix_ms: 99, ..short(0.7, 9) }).unwrap().summary;
        assert_eq!(a, b);
        let c = simulate(&short(0.7, 10)).unwrap().summary;
        assert_ne!(a.log_digest, c.log_digest);
    }

    #[test]
    fn rejects_bad_accuracy() {
        assert!(matches!(simulate(&short(1.5, 0)), Err(SimError::InvalidAccuracy(_))));
    }
}
