use serde::{Deserialize, Serialize};

use super::sequence::TrialOutcome;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionScore {
    pub orders_completed: u32,
    pub orders_correct: u32,
    pub judgment_hits: u32,
    pub judgment_false_alarms: u32,
    pub mean_response_time_ms: f64,
}

pub fn update_score(score: &SessionScore, outcome: &TrialOutcome) -> SessionScore {
    let mut next = score.clone();
    next.orders_completed += 1;
    if outcome.overall_correct {
        next.orders_correct += 1;
    }
    if outcome.judged_yes {
        if outcome.is_target {
            next.judgment_hits += 1;
        } else {
            next.judgment_false_alarms += 1;
        }
    }
    let n = f64::from(next.orders_completed);
    next.mean_response_time_ms += (outcome.response_time_ms - next.mean_response_time_ms) / n;
    next
}
