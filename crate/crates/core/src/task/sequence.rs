use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GameConfig;
use super::TaskError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub index: usize,
    pub customer_id: String,
    pub drink: String,
    /// Kept in vocabulary order so equal sets serialize identically.
    pub ingredients: Vec<String>,
    pub is_target: bool,
}

/// The full program of orders, fixed before play starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSequence {
    pub config_hash: String,
    pub config: GameConfig,
    pub orders: Vec<Order>,
}

impl OrderSequence {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn n_level(&self) -> usize {
        self.config.n_level
    }

    pub fn order(&self, index: usize) -> Result<&Order, TaskError> {
        self.orders.get(index).ok_or(TaskError::IndexOutOfRange {
            index,
            len: self.orders.len(),
        })
    }

    pub fn target_count(&self) -> usize {
        self.orders.iter().filter(|o| o.is_target).count()
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("sequence serializes");
        super::config::hex_digest(&json)
    }
}

/// Builds the order program for `config`. Pure in `config`: the seed is part of it.
pub fn generate_sequence(config: &GameConfig) -> Result<OrderSequence, TaskError> {
    let issues = config.issues();
    if !issues.is_empty() {
        return Err(TaskError::ConfigInvalid(issues));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_level;
    let trials = config.trial_count;

    let mut target_flags = vec![false; trials];
    for offset in index::sample(&mut rng, config.eligible_trials(), config.target_count()) {
        target_flags[n + offset] = true;
    }

    let drinks = &config.drink_vocab;
    let mut drink_idx: Vec<usize> = Vec::with_capacity(trials);
    for (i, &target) in target_flags.iter().enumerate() {
        let pick = if i < n {
            rng.gen_range(0..drinks.len())
        } else {
            let back = drink_idx[i - n];
            if target {
                back
            } else {
                // uniform over the vocabulary minus the n-back drink
                let k = rng.gen_range(0..drinks.len() - 1);
                if k >= back {
                    k + 1
                } else {
                    k
                }
            }
        };
        drink_idx.push(pick);
    }

    let vocab_positions: Vec<usize> = (0..config.ingredient_vocab.len()).collect();
    let orders = drink_idx
        .iter()
        .zip(&target_flags)
        .enumerate()
        .map(|(i, (&d, &is_target))| {
            let mut picked: Vec<usize> = vocab_positions
                .choose_multiple(&mut rng, config.ingredient_count)
                .copied()
                .collect();
            picked.sort_unstable();
            Order {
                index: i,
                customer_id: format!("customer-{:03}", i + 1),
                drink: drinks[d].clone(),
                ingredients: picked
                    .into_iter()
                    .map(|p| config.ingredient_vocab[p].clone())
                    .collect(),
                is_target,
            }
        })
        .collect();

    Ok(OrderSequence {
        config_hash: config.digest(),
        config: config.clone(),
        orders,
    })
}

/// True iff the drink at `index` repeats the one `n_level` orders earlier.
pub fn is_target(sequence: &OrderSequence, index: usize) -> Result<bool, TaskError> {
    let order = sequence.order(index)?;
    let n = sequence.n_level();
    Ok(index >= n && sequence.orders[index - n].drink == order.drink)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerResponse {
    pub order_index: usize,
    pub judgment: Judgment,
    pub selected_drink: String,
    pub selected_ingredients: Vec<String>,
    pub response_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub order_index: usize,
    pub judgment_correct: bool,
    pub drink_correct: bool,
    pub ingredients_correct: bool,
    pub overall_correct: bool,
    pub feedback: Feedback,
    pub is_target: bool,
    pub judged_yes: bool,
    pub response_time_ms: f64,
}

/// Judges one response against its order. Duplicate detection is the
/// caller's job (see `ResponseBook`).
pub fn evaluate_response(
    sequence: &OrderSequence,
    response: &PlayerResponse,
) -> Result<TrialOutcome, TaskError> {
    let order = sequence.order(response.order_index)?;
    let target = is_target(sequence, response.order_index)?;
    let judged_yes = response.judgment == Judgment::Yes;
    let judgment_correct = judged_yes == target;
    let drink_correct = response.selected_drink == order.drink;
    let selected: BTreeSet<&str> = response.selected_ingredients.iter().map(String::as_str).collect();
    let wanted: BTreeSet<&str> = order.ingredients.iter().map(String::as_str).collect();
    let ingredients_correct = selected == wanted;
    let overall_correct = judgment_correct && drink_correct && ingredients_correct;
    Ok(TrialOutcome {
        order_index: response.order_index,
        judgment_correct,
        drink_correct,
        ingredients_correct,
        overall_correct,
        feedback: if overall_correct {
            Feedback::Positive
        } else {
            Feedback::Negative
        },
        is_target: target,
        judged_yes,
        response_time_ms: response.response_time_ms.max(0.0),
    })
}

/// Tracks which orders already received a response; submissions are final.
#[derive(Debug, Clone, Default)]
pub struct ResponseBook {
    answered: BTreeSet<usize>,
}

impl ResponseBook {
    pub fn evaluate(
        &mut self,
        sequence: &OrderSequence,
        response: &PlayerResponse,
    ) -> Result<TrialOutcome, TaskError> {
        if self.answered.contains(&response.order_index) {
            return Err(TaskError::DuplicateResponse(response.order_index));
        }
        let outcome = evaluate_response(sequence, response)?;
        self.answered.insert(response.order_index);
        Ok(outcome)
    }
}
