use serde::{Deserialize, Serialize};

use super::chunk::Epoch;
use super::SignalError;

pub const DEFAULT_ARTIFACT_THRESHOLD_UV: f64 = 100.0;
pub const DEFAULT_CALIBRATION_EPOCHS: usize = 20;
pub const DEFAULT_THRESHOLD_RATIO: f64 = 1.5;
pub const DEFAULT_HYSTERESIS_EPOCHS: u32 = 3;

/// True iff any sample magnitude in the (already filtered) epoch exceeds the threshold.
pub fn detect_artifact(epoch: &Epoch, amplitude_threshold_uv: f64) -> bool {
    assert!(amplitude_threshold_uv > 0.0, "artifact threshold must be positive");
    epoch
        .samples
        .iter()
        .flatten()
        .any(|v| v.abs() > amplitude_threshold_uv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadClass {
    Nominal,
    Overload,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub baseline_index: f64,
    pub epochs_used: usize,
    pub complete: bool,
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// Median of the first `min_epochs` indices; incomplete until that many exist.
pub fn calibrate_baseline(indices: &[f64], min_epochs: usize) -> CalibrationState {
    let used = &indices[..indices.len().min(min_epochs)];
    CalibrationState {
        baseline_index: median(used),
        epochs_used: used.len(),
        complete: used.len() >= min_epochs && min_epochs > 0,
    }
}

/// Accumulates clean-epoch indices until the baseline is fixed.
#[derive(Debug, Clone)]
pub struct Calibrator {
    min_epochs: usize,
    indices: Vec<f64>,
    state: CalibrationState,
}

impl Calibrator {
    pub fn new(min_epochs: usize) -> Self {
        Self {
            min_epochs: min_epochs.max(1),
            indices: Vec::with_capacity(min_epochs),
            state: calibrate_baseline(&[], min_epochs.max(1)),
        }
    }

    pub fn state(&self) -> CalibrationState {
        self.state
    }

    pub fn observe(&mut self, index: f64) -> CalibrationState {
        if !self.state.complete {
            self.indices.push(index);
            self.state = calibrate_baseline(&self.indices, self.min_epochs);
        }
        self.state
    }
}

/// Undebounced decision: overload iff index / baseline exceeds the ratio.
pub fn raw_decision(index: f64, baseline_index: f64, threshold_ratio: f64) -> WorkloadClass {
    if index / baseline_index > threshold_ratio {
        WorkloadClass::Overload
    } else {
        WorkloadClass::Nominal
    }
}

/// Two-class decision with a debounce: the emitted class flips only after
/// `hysteresis_epochs` consecutive raw decisions disagree with it.
#[derive(Debug, Clone)]
pub struct Classifier {
    threshold_ratio: f64,
    hysteresis_epochs: u32,
    current: WorkloadClass,
    contrary_run: u32,
}

impl Classifier {
    pub fn new(threshold_ratio: f64, hysteresis_epochs: u32) -> Self {
        Self {
            threshold_ratio,
            hysteresis_epochs,
            current: WorkloadClass::Nominal,
            contrary_run: 0,
        }
    }

    pub fn current(&self) -> WorkloadClass {
        self.current
    }

    pub fn classify(
        &mut self,
        index: f64,
        calibration: &CalibrationState,
    ) -> Result<WorkloadClass, SignalError> {
        if !calibration.complete {
            return Err(SignalError::NotCalibrated);
        }
        let raw = raw_decision(index, calibration.baseline_index, self.threshold_ratio);
        if raw == self.current {
            self.contrary_run = 0;
        } else {
            self.contrary_run += 1;
            if self.contrary_run >= self.hysteresis_epochs {
                self.current = raw;
                self.contrary_run = 0;
            }
        }
        Ok(self.current)
    }
}
