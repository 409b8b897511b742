//! The order-cycle state machine.
//!
//! Every order walks `Presenting -> Judging -> SelectingDrink ->
//! SelectingIngredients -> Feedback` and then hands over to the next order.
//! `ClockExpired` short-circuits to `Finished` from anywhere; `Finished`
//! accepts nothing.

use serde::{Deserialize, Serialize};

use super::score::{update_score, SessionScore};
use super::sequence::{Judgment, OrderSequence, PlayerResponse, ResponseBook, TrialOutcome};
use super::TaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "order_index", rename_all = "snake_case")]
pub enum GamePhase {
    Idle,
    Presenting(usize),
    Judging(usize),
    SelectingDrink(usize),
    SelectingIngredients(usize),
    Feedback(usize),
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GameEvent {
    PresentNext,
    SubmitJudgment(Judgment),
    SubmitDrink(String),
    SubmitIngredients(Vec<String>),
    FeedbackDone,
    ClockExpired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PresentNext,
    SubmitJudgment,
    SubmitDrink,
    SubmitIngredients,
    FeedbackDone,
    ClockExpired,
}

impl GameEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            GameEvent::PresentNext => EventKind::PresentNext,
            GameEvent::SubmitJudgment(_) => EventKind::SubmitJudgment,
            GameEvent::SubmitDrink(_) => EventKind::SubmitDrink,
            GameEvent::SubmitIngredients(_) => EventKind::SubmitIngredients,
            GameEvent::FeedbackDone => EventKind::FeedbackDone,
            GameEvent::ClockExpired => EventKind::ClockExpired,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Clock,
    SequenceExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Effect {
    OrderPresented(usize),
    Outcome(TrialOutcome),
    Finished { score: SessionScore, reason: EndReason },
}

/// The transition table, independent of payloads. `order_count` decides
/// whether `FeedbackDone` moves on or finishes.
pub fn next_phase(
    phase: GamePhase,
    event: EventKind,
    order_count: usize,
) -> Result<GamePhase, TaskError> {
    use EventKind as E;
    use GamePhase as P;
    let next = match (phase, event) {
        (P::Finished, _) => None,
        (_, E::ClockExpired) => Some(P::Finished),
        (P::Idle, E::PresentNext) if order_count > 0 => Some(P::Presenting(0)),
        (P::Presenting(i), E::PresentNext) => Some(P::Judging(i)),
        (P::Judging(i), E::SubmitJudgment) => Some(P::SelectingDrink(i)),
        (P::SelectingDrink(i), E::SubmitDrink) => Some(P::SelectingIngredients(i)),
        (P::SelectingIngredients(i), E::SubmitIngredients) => Some(P::Feedback(i)),
        (P::Feedback(i), E::FeedbackDone) if i + 1 < order_count => Some(P::Presenting(i + 1)),
        (P::Feedback(_), E::FeedbackDone) => Some(P::Finished),
        _ => None,
    };
    next.ok_or(TaskError::IllegalTransition { phase, event })
}

/// Drives one session's order cycle. All mutation goes through [`advance`](Self::advance).
#[derive(Debug, Clone)]
pub struct GameMachine {
    sequence: OrderSequence,
    phase: GamePhase,
    score: SessionScore,
    book: ResponseBook,
    presented_at_s: f64,
    pending_judgment: Option<Judgment>,
    pending_drink: Option<String>,
    outcomes: Vec<TrialOutcome>,
}

impl GameMachine {
    pub fn new(sequence: OrderSequence) -> Self {
        Self {
            sequence,
            phase: GamePhase::Idle,
            score: SessionScore::default(),
            book: ResponseBook::default(),
            presented_at_s: 0.0,
            pending_judgment: None,
            pending_drink: None,
            outcomes: Vec::new(),
        }
    }

    pub fn phase(&self) -> GamePhase {
        self.phase
    }

    pub fn score(&self) -> &SessionScore {
        &self.score
    }

    pub fn sequence(&self) -> &OrderSequence {
        &self.sequence
    }

    pub fn outcomes(&self) -> &[TrialOutcome] {
        &self.outcomes
    }

    /// Applies `event` at session time `clock_s`. Illegal events leave the
    /// machine untouched.
    pub fn advance(&mut self, event: GameEvent, clock_s: f64) -> Result<Vec<Effect>, TaskError> {
        let next = next_phase(self.phase, event.kind(), self.sequence.len())?;
        let mut effects = Vec::new();
        match (self.phase, event) {
            (_, GameEvent::ClockExpired) => {
                effects.push(Effect::Finished {
                    score: self.score.clone(),
                    reason: EndReason::Clock,
                });
            }
            (GamePhase::Idle, GameEvent::PresentNext) => {
                self.present(clock_s);
                effects.push(Effect::OrderPresented(0));
            }
            (GamePhase::Judging(_), GameEvent::SubmitJudgment(j)) => self.pending_judgment = Some(j),
            (GamePhase::SelectingDrink(_), GameEvent::SubmitDrink(d)) => self.pending_drink = Some(d),
            (GamePhase::SelectingIngredients(i), GameEvent::SubmitIngredients(ingredients)) => {
                let response = PlayerResponse {
                    order_index: i,
                    judgment: self.pending_judgment.take().expect("judged before ingredients"),
                    selected_drink: self.pending_drink.take().expect("drink before ingredients"),
                    selected_ingredients: ingredients,
                    response_time_ms: ((clock_s - self.presented_at_s) * 1000.0).max(0.0),
                };
                let outcome = self.book.evaluate(&self.sequence, &response)?;
                self.score = update_score(&self.score, &outcome);
                self.outcomes.push(outcome.clone());
                effects.push(Effect::Outcome(outcome));
            }
            (GamePhase::Feedback(_), GameEvent::FeedbackDone) => match next {
                GamePhase::Presenting(i) => {
                    self.present(clock_s);
                    effects.push(Effect::OrderPresented(i));
                }
                _ => effects.push(Effect::Finished {
                    score: self.score.clone(),
                    reason: EndReason::SequenceExhausted,
                }),
            },
            _ => {}
        }
        self.phase = next;
        Ok(effects)
    }

    fn present(&mut self, clock_s: f64) {
        self.presented_at_s = clock_s;
        self.pending_judgment = None;
        self.pending_drink = None;
    }
}
