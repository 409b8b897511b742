use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_DRINKS: [&str; 4] = ["cola", "water", "juice", "lemonade"];
pub const DEFAULT_INGREDIENTS: [&str; 8] = [
    "tomato", "cheese", "mushroom", "olive", "ham", "pepper", "onion", "basil",
];
pub const MAX_INGREDIENTS_PER_ORDER: usize = 5;

/// Audience-chosen game parameters. Everything the order sequence depends on
/// lives here, including the RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub n_level: usize,
    pub ingredient_count: usize,
    pub drink_vocab: Vec<String>,
    pub ingredient_vocab: Vec<String>,
    pub target_rate: f64,
    pub trial_count: usize,
    pub session_duration_s: f64,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            n_level: 1,
            ingredient_count: 3,
            drink_vocab: DEFAULT_DRINKS.iter().map(|s| s.to_string()).collect(),
            ingredient_vocab: DEFAULT_INGREDIENTS.iter().map(|s| s.to_string()).collect(),
            target_rate: 0.3,
            trial_count: 60,
            session_duration_s: 180.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigIssue {
    NLevelZero,
    IngredientCountOutOfRange(usize),
    TooFewDrinks(usize),
    TooFewIngredients { vocab: usize, per_order: usize },
    DuplicateDrink(String),
    DuplicateIngredient(String),
    TargetRateOutOfRange(f64),
    TooFewTrials { trial_count: usize, minimum: usize },
    BadDuration(f64),
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigIssue::NLevelZero => write!(f, "n_level must be at least 1"),
            ConfigIssue::IngredientCountOutOfRange(n) => {
                write!(f, "ingredient_count {n} outside 1..={MAX_INGREDIENTS_PER_ORDER}")
            }
            ConfigIssue::TooFewDrinks(n) => write!(f, "drink_vocab needs at least 2 entries, got {n}"),
            ConfigIssue::TooFewIngredients { vocab, per_order } => write!(
                f,
                "ingredient_vocab has {vocab} entries but orders need {per_order}"
            ),
            ConfigIssue::DuplicateDrink(d) => write!(f, "duplicate drink '{d}'"),
            ConfigIssue::DuplicateIngredient(i) => write!(f, "duplicate ingredient '{i}'"),
            ConfigIssue::TargetRateOutOfRange(r) => write!(f, "target_rate {r} outside [0, 1]"),
            ConfigIssue::TooFewTrials { trial_count, minimum } => {
                write!(f, "trial_count {trial_count} below minimum {minimum}")
            }
            ConfigIssue::BadDuration(d) => write!(f, "session_duration_s {d} must be positive"),
        }
    }
}

impl GameConfig {
    /// Returns every violated invariant, empty when the config is usable.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        if self.n_level == 0 {
            issues.push(ConfigIssue::NLevelZero);
        }
        if !(1..=MAX_INGREDIENTS_PER_ORDER).contains(&self.ingredient_count) {
            issues.push(ConfigIssue::IngredientCountOutOfRange(self.ingredient_count));
        }
        if self.drink_vocab.len() < 2 {
            issues.push(ConfigIssue::TooFewDrinks(self.drink_vocab.len()));
        }
        if self.ingredient_vocab.len() < self.ingredient_count {
            issues.push(ConfigIssue::TooFewIngredients {
                vocab: self.ingredient_vocab.len(),
                per_order: self.ingredient_count,
            });
        }
        if let Some(d) = first_duplicate(&self.drink_vocab) {
            issues.push(ConfigIssue::DuplicateDrink(d));
        }
        if let Some(i) = first_duplicate(&self.ingredient_vocab) {
            issues.push(ConfigIssue::DuplicateIngredient(i));
        }
        if !(0.0..=1.0).contains(&self.target_rate) {
            issues.push(ConfigIssue::TargetRateOutOfRange(self.target_rate));
        }
        let minimum = self.n_level + 1;
        if self.trial_count < minimum {
            issues.push(ConfigIssue::TooFewTrials {
                trial_count: self.trial_count,
                minimum,
            });
        }
        if !(self.session_duration_s.is_finite() && self.session_duration_s > 0.0) {
            issues.push(ConfigIssue::BadDuration(self.session_duration_s));
        }
        issues
    }

    /// Number of indices that may host a target (everything past the warm-up).
    pub fn eligible_trials(&self) -> usize {
        self.trial_count.saturating_sub(self.n_level)
    }

    pub fn target_count(&self) -> usize {
        (self.target_rate * self.eligible_trials() as f64).round() as usize
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn first_duplicate(items: &[String]) -> Option<String> {
    let mut seen = HashSet::new();
    items.iter().find(|s| !seen.insert(s.as_str())).cloned()
}

/// Partial update sent by the audience panel. Absent fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingredient_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drink_vocab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingredient_vocab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ConfigPatch {
    pub fn apply_to(&self, base: &GameConfig) -> GameConfig {
        let mut out = base.clone();
        if let Some(v) = self.n_level {
            out.n_level = v;
        }
        if let Some(v) = self.ingredient_count {
            out.ingredient_count = v;
        }
        if let Some(v) = &self.drink_vocab {
            out.drink_vocab = v.clone();
        }
        if let Some(v) = &self.ingredient_vocab {
            out.ingredient_vocab = v.clone();
        }
        if let Some(v) = self.target_rate {
            out.target_rate = v;
        }
        if let Some(v) = self.trial_count {
            out.trial_count = v;
        }
        if let Some(v) = self.session_duration_s {
            out.session_duration_s = v;
        }
        if let Some(v) = self.seed {
            out.seed = v;
        }
        out
    }

    pub fn full(config: &GameConfig) -> Self {
        Self {
            n_level: Some(config.n_level),
            ingredient_count: Some(config.ingredient_count),
            drink_vocab: Some(config.drink_vocab.clone()),
            ingredient_vocab: Some(config.ingredient_vocab.clone()),
            target_rate: Some(config.target_rate),
            trial_count: Some(config.trial_count),
            session_duration_s: Some(config.session_duration_s),
            seed: Some(config.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(GameConfig::default().issues().is_empty());
    }

    #[test]
    fn reports_each_violation() {
        let cfg = GameConfig {
            n_level: 0,
            ingredient_count: 9,
            drink_vocab: vec!["cola".into()],
            target_rate: 1.5,
            trial_count: 0,
            ..GameConfig::default()
        };
        let issues = cfg.issues();
        assert!(issues.contains(&ConfigIssue::NLevelZero));
        assert!(issues.contains(&ConfigIssue::IngredientCountOutOfRange(9)));
        assert!(issues.contains(&ConfigIssue::TooFewDrinks(1)));
        assert!(issues.contains(&ConfigIssue::TooFewIngredients { vocab: 8, per_order: 9 }));
        assert!(issues.contains(&ConfigIssue::TargetRateOutOfRange(1.5)));
        assert!(issues.contains(&ConfigIssue::TooFewTrials { trial_count: 0, minimum: 1 }));
    }

    #[test]
    fn duplicates_rejected() {
        let cfg = GameConfig {
            drink_vocab: vec!["cola".into(), "water".into(), "cola".into()],
            ..GameConfig::default()
        };
        assert_eq!(cfg.issues(), vec![ConfigIssue::DuplicateDrink("cola".into())]);
    }

    #[test]
    fn nan_rate_rejected() {
        let cfg = GameConfig { target_rate: f64::NAN, ..GameConfig::default() };
        assert_eq!(cfg.issues().len(), 1);
    }

    #[test]
    fn patch_only_touches_given_fields() {
        let base = GameConfig::default();
        let patch = ConfigPatch { ingredient_count: Some(4), ..ConfigPatch::default() };
        let out = patch.apply_to(&base);
        assert_eq!(out.ingredient_count, 4);
        assert_eq!(out.n_level, base.n_level);
        assert_eq!(ConfigPatch::full(&out).apply_to(&base), out);
    }

    #[test]
    fn target_count_rounds() {
        let cfg = GameConfig { n_level: 1, trial_count: 31, target_rate: 0.3, ..GameConfig::default() };
        assert_eq!(cfg.target_count(), 9);
    }
}
