use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::SignalError;

pub const CHANNEL_COUNT: usize = 16;

pub const STANDARD_16: [&str; CHANNEL_COUNT] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "C3", "Cz", "C4", "P7", "P3", "Pz", "P4", "P8", "Oz",
];
const STANDARD_FRONTAL: [&str; 7] = ["Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8"];
const STANDARD_PARIETAL: [&str; 5] = ["P7", "P3", "Pz", "P4", "P8"];

/// Electrode names plus the two regions the workload index reads from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub name: String,
    pub channel_names: Vec<String>,
    pub frontal_set: Vec<usize>,
    pub parietal_set: Vec<usize>,
}

impl ChannelLayout {
    pub fn new(
        name: impl Into<String>,
        channel_names: Vec<String>,
        frontal_set: Vec<usize>,
        parietal_set: Vec<usize>,
    ) -> Result<Self, SignalError> {
        let layout = Self {
            name: name.into(),
            channel_names,
            frontal_set,
            parietal_set,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// The 10-20 subset used by default.
    pub fn standard16() -> Self {
        let names: Vec<String> = STANDARD_16.iter().map(|s| s.to_string()).collect();
        let idx = |want: &[&str]| -> Vec<usize> {
            want.iter()
                .map(|w| STANDARD_16.iter().position(|n| n == w).expect("known electrode"))
                .collect()
        };
        Self {
            name: "standard16".into(),
            channel_names: names,
            frontal_set: idx(&STANDARD_FRONTAL),
            parietal_set: idx(&STANDARD_PARIETAL),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "standard16" => Some(Self::standard16()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |why: String| Err(SignalError::InvalidLayout(why));
        if self.channel_names.len() != CHANNEL_COUNT {
            return bad(format!("expected {CHANNEL_COUNT} channels, got {}", self.channel_names.len()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.channel_names.iter().find(|n| !seen.insert(n.as_str())) {
            return bad(format!("duplicate channel name '{dup}'"));
        }
        if self.frontal_set.is_empty() || self.parietal_set.is_empty() {
            return bad("frontal and parietal sets must be non-empty".into());
        }
        if let Some(i) = self
            .frontal_set
            .iter()
            .chain(&self.parietal_set)
            .find(|&&i| i >= CHANNEL_COUNT)
        {
            return bad(format!("channel index {i} out of range"));
        }
        if self.frontal_set.iter().any(|i| self.parietal_set.contains(i)) {
            return bad("frontal and parietal sets overlap".into());
        }
        Ok(())
    }

    pub fn is_frontal(&self, channel: usize) -> bool {
        self.frontal_set.contains(&channel)
    }

    pub fn is_parietal(&self, channel: usize) -> bool {
        self.parietal_set.contains(&channel)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }
}
