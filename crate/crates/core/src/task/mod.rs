//! Back-to-Pizza task engine: order program generation, the order-cycle
//! state machine, response evaluation and scoring.

mod config;
mod machine;
mod score;
mod sequence;

use thiserror::Error;

pub use config::{
    ConfigIssue, ConfigPatch, GameConfig, DEFAULT_DRINKS, DEFAULT_INGREDIENTS,
    MAX_INGREDIENTS_PER_ORDER,
};
pub use machine::{next_phase, Effect, EndReason, EventKind, GameEvent, GameMachine, GamePhase};
pub use score::{update_score, SessionScore};
pub use sequence::{
    evaluate_response, generate_sequence, is_target, Feedback, Judgment, Order, OrderSequence,
    PlayerResponse, ResponseBook, TrialOutcome,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("invalid game config: {}", join_issues(.0))]
    ConfigInvalid(Vec<ConfigIssue>),
    #[error("order index {index} out of range (sequence has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("order {0} already has a response")]
    DuplicateResponse(usize),
    #[error("event {event:?} not allowed in phase {phase:?}")]
    IllegalTransition { phase: GamePhase, event: EventKind },
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
