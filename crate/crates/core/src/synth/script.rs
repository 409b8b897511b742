use serde::{Deserialize, Serialize};

use super::SynthError;

/// Default script length when only steps are given.
pub const DEFAULT_SCRIPT_DURATION_S: f64 = 180.0;

/// Ramp applied when the level changes, seconds.
pub const LEVEL_RAMP_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStep {
    #[serde(rename = "t")]
    pub t_start_s: f64,
    pub level: f64,
}

/// Piecewise-constant workload level over time.
///
/// Serializes as a bare step array `[{"t":0,"level":0}, ...]`; an object
/// `{"steps": [...], "duration_s": 120}` is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadScript {
    pub steps: Vec<LevelStep>,
    pub duration_s: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptRepr {
    Steps(Vec<LevelStep>),
    Full {
        steps: Vec<LevelStep>,
        #[serde(default = "default_duration")]
        duration_s: f64,
    },
}

fn default_duration() -> f64 {
    DEFAULT_SCRIPT_DURATION_S
}

impl<'de> Deserialize<'de> for WorkloadScript {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match ScriptRepr::deserialize(d)? {
            ScriptRepr::Steps(steps) => Self {
                steps,
                duration_s: DEFAULT_SCRIPT_DURATION_S,
            },
            ScriptRepr::Full { steps, duration_s } => Self { steps, duration_s },
        })
    }
}

impl WorkloadScript {
    pub fn new(steps: Vec<LevelStep>, duration_s: f64) -> Result<Self, SynthError> {
        let s = Self { steps, duration_s };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(level: f64, duration_s: f64) -> Result<Self, SynthError> {
        Self::new(vec![LevelStep { t_start_s: 0.0, level }], duration_s)
    }

    /// Level 0 until `at_s`, then level 1.
    pub fn step(at_s: f64, duration_s: f64) -> Result<Self, SynthError> {
        Self::new(
            vec![
                LevelStep { t_start_s: 0.0, level: 0.0 },
                LevelStep { t_start_s: at_s, level: 1.0 },
            ],
            duration_s,
        )
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let s: Self = serde_json::from_str(text).map_err(|e| SynthError::InvalidScript(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Step array form; the duration is carried separately.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.steps).expect("plain data")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScript(m));
        let Some(first) = self.steps.first() else {
            return bad("script has no steps".into());
        };
        if first.t_start_s != 0.0 {
            return bad(format!("first step starts at {} s, not 0", first.t_start_s));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.level) {
                return bad(format!("step {i}: level {} outside [0, 1]", s.level));
            }
            if !s.t_start_s.is_finite() {
                return bad(format!("step {i}: start time not finite"));
            }
        }
        if let Some(w) = self.steps.windows(2).position(|w| w[1].t_start_s <= w[0].t_start_s) {
            return bad(format!("step {}: start times not strictly increasing", w + 1));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration {} s must be positive", self.duration_s));
        }
        Ok(())
    }

    /// Scripted (target) level in force at `t`, without the ramp.
    pub fn target_level(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.t_start_s <= t);
        self.steps[i.saturating_sub(1)].level
    }

    /// Level as rendered: each change ramps linearly over `LEVEL_RAMP_S`.
    pub fn level_at(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.t_start_s <= t).max(1) - 1;
        let cur = self.steps[i];
        if i == 0 {
            return cur.level;
        }
        let prev = self.steps[i - 1].level;
        let frac = ((t - cur.t_start_s) / LEVEL_RAMP_S).clamp(0.0, 1.0);
        prev + (cur.level - prev) * frac
    }

    /// Start times of every level change after t = 0.
    pub fn transitions(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().skip(1).map(|s| s.t_start_s)
    }
}
