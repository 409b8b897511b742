//! Wire protocol: one JSON object per WebSocket text frame, discriminated by
//! `type` (snake_case). The machine-readable schema lives in
//! `schema/wire_protocol.schema.json`.

use serde::{Deserialize, Serialize};

use crate::signal::WorkloadSample;
use crate::task::{ConfigIssue, ConfigPatch, EndReason, GameConfig, GamePhase, Judgment, Order, SessionScore, TrialOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Player,
    Spectator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetConfig {
        session_id: String,
        #[serde(flatten)]
        patch: ConfigPatch,
    },
    StartSession {
        session_id: String,
    },
    SubmitJudgment {
        session_id: String,
        judgment: Judgment,
    },
    SubmitDrink {
        session_id: String,
        drink: String,
    },
    SubmitIngredients {
        session_id: String,
        ingredients: Vec<String>,
    },
    Subscribe {
        session_id: String,
        role: Role,
    },
}

impl ClientMessage {
    pub fn session_id(&self) -> &str {
        match self {
            ClientMessage::SetConfig { session_id, .. }
            | ClientMessage::StartSession { session_id }
            | ClientMessage::SubmitJudgment { session_id, .. }
            | ClientMessage::SubmitDrink { session_id, .. }
            | ClientMessage::SubmitIngredients { session_id, .. }
            | ClientMessage::Subscribe { session_id, .. } => session_id,
        }
    }

    /// Unknown fields are rejected in every message, including the flat
    /// config fields of `set_config`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let message: Self = serde_json::from_value(value.clone())?;
        let known = serde_json::to_value(&message).expect("plain data");
        let patch_fields = serde_json::to_value(ConfigPatch::full(&Default::default())).expect("plain data");
        let is_set_config = matches!(message, ClientMessage::SetConfig { .. });
        if let Some(obj) = value.as_object() {
            let unknown = obj
                .keys()
                .find(|k| known.get(k.as_str()).is_none() && !(is_set_config && patch_fields.get(k.as_str()).is_some()));
            if let Some(k) = unknown {
                return Err(serde::de::Error::custom(format!("unknown field `{k}`")));
            }
        }
        Ok(message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Configuring,
    Running,
    Finished,
}

/// What a client may see of an order. The target flag stays server-side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicOrder {
    pub order_index: usize,
    pub customer_id: String,
    /// The spoken drink order; the UI decides how to cue it.
    pub drink_cue: String,
    pub ingredients: Vec<String>,
}

impl From<&Order> for PublicOrder {
    fn from(o: &Order) -> Self {
        Self {
            order_index: o.index,
            customer_id: o.customer_id.clone(),
            drink_cue: o.drink.clone(),
            ingredients: o.ingredients.clone(),
        }
    }
}

/// Mirror of the session sent to new subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: SessionPhase,
    pub config: GameConfig,
    pub config_hash: String,
    pub sequence_digest: String,
    pub order_count: usize,
    pub game_phase: GamePhase,
    pub current_order: Option<PublicOrder>,
    pub score: SessionScore,
    pub latest_workload: Option<WorkloadSample>,
    pub clock_s: f64,
    pub remaining_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ConfigLocked,
    ConfigInvalid,
    AlreadyRunning,
    NotRunning,
    IllegalTransition,
    WrongSession,
    NotPlayer,
    PlayerTaken,
    MalformedMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    ConfigAck {
        clock_s: f64,
        config: GameConfig,
        config_hash: String,
        sequence_digest: String,
    },
    OrderPresented {
        clock_s: f64,
        order: PublicOrder,
    },
    PhaseChanged {
        clock_s: f64,
        session_phase: SessionPhase,
        game_phase: GamePhase,
    },
    TrialFeedback {
        clock_s: f64,
        outcome: TrialOutcome,
    },
    WorkloadUpdate {
        clock_s: f64,
        sample: WorkloadSample,
    },
    CountdownTick {
        clock_s: f64,
        remaining_s: f64,
    },
    ScoreUpdate {
        clock_s: f64,
        score: SessionScore,
    },
    SessionEnd {
        clock_s: f64,
        score: SessionScore,
        reason: EndReason,
    },
    StateSnapshot {
        clock_s: f64,
        state: SessionState,
    },
    Error {
        clock_s: f64,
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        issues: Vec<ConfigIssue>,
    },
}

impl ServerMessage {
    pub fn clock_s(&self) -> f64 {
        match self {
            ServerMessage::ConfigAck { clock_s, .. }
            | ServerMessage::OrderPresented { clock_s, .. }
            | ServerMessage::PhaseChanged { clock_s, .. }
            | ServerMessage::TrialFeedback { clock_s, .. }
            | ServerMessage::WorkloadUpdate { clock_s, .. }
            | ServerMessage::CountdownTick { clock_s, .. }
            | ServerMessage::ScoreUpdate { clock_s, .. }
            | ServerMessage::SessionEnd { clock_s, .. }
            | ServerMessage::StateSnapshot { clock_s, .. }
            | ServerMessage::Error { clock_s, .. } => *clock_s,
        }
    }

    /// The snake_case `type` tag.
    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::ConfigAck { .. } => "config_ack",
            ServerMessage::OrderPresented { .. } => "order_presented",
            ServerMessage::PhaseChanged { .. } => "phase_changed",
            ServerMessage::TrialFeedback { .. } => "trial_feedback",
            ServerMessage::WorkloadUpdate { .. } => "workload_update",
            ServerMessage::CountdownTick { .. } => "countdown_tick",
            ServerMessage::ScoreUpdate { .. } => "score_update",
            ServerMessage::SessionEnd { .. } => "session_end",
            ServerMessage::StateSnapshot { .. } => "state_snapshot",
            ServerMessage::Error { .. } => "error",
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match self {
            ServerMessage::Error { code, .. } => Some(*code),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_config_is_flat() {
        let m = ClientMessage::from_json(r#"{"type":"set_config","session_id":"s","ingredient_count":4}"#).unwrap();
        match &m {
            ClientMessage::SetConfig { patch, .. } => assert_eq!(patch.ingredient_count, Some(4)),
            other => panic!("{other:?}"),
        }
        assert_eq!(ClientMessage::from_json(&m.to_json()).unwrap(), m);
        assert!(ClientMessage::from_json(r#"{"type":"set_config","session_id":"s","nlevel":4}"#).is_err());
    }

    #[test]
    fn inbound_requires_session_id() {
        assert!(ClientMessage::from_json(r#"{"type":"start_session"}"#).is_err());
        assert!(ClientMessage::from_json(r#"{"type":"submit_judgment","session_id":"s","judgment":"maybe"}"#).is_err());
        assert!(ClientMessage::from_json(r#"{"type":"launch","session_id":"s"}"#).is_err());
        assert!(ClientMessage::from_json(r#"{"type":"start_session","session_id":"s","force":true}"#).is_err());
        assert!(ClientMessage::from_json(r#"{"type":"set_config","session_id":"s","n_level":null}"#).is_ok());
        let j = ClientMessage::from_json(r#"{"type":"submit_judgment","session_id":"s","judgment":"yes"}"#).unwrap();
        assert_eq!(j.session_id(), "s");
    }

    #[test]
    fn outbound_tagging() {
        let m = ServerMessage::PhaseChanged {
            clock_s: 1.5,
            session_phase: SessionPhase::Running,
            game_phase: GamePhase::Judging(3),
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["type"], "phase_changed");
        assert_eq!(v["clock_s"], 1.5);
        assert_eq!(v["game_phase"]["phase"], "judging");
        assert_eq!(v["game_phase"]["order_index"], 3);
        assert_eq!(m.kind(), "phase_changed");
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}

