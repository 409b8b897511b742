//! EEG workload pipeline: band-pass -> epoch -> Welch PSD -> band powers ->
//! frontal-theta / parietal-alpha index -> baseline-relative decision.

mod band;
mod chunk;
mod classify;
mod epoch;
mod filter;
mod layout;
mod pipeline;
mod welch;

use thiserror::Error;

pub use band::{band_power, workload_index, BandDefinition, IndexValue, ALPHA_FLOOR};
pub use chunk::{concat_chunks, split_chunk, EegChunk, Epoch};
pub use classify::{
    calibrate_baseline, detect_artifact, raw_decision, CalibrationState, Calibrator, Classifier,
    WorkloadClass, DEFAULT_ARTIFACT_THRESHOLD_UV, DEFAULT_CALIBRATION_EPOCHS,
    DEFAULT_HYSTERESIS_EPOCHS, DEFAULT_THRESHOLD_RATIO,
};
pub use epoch::{segment_epochs, EpochSegmenter};
pub use filter::{
    apply_filter, design_bandpass, filtfilt, Biquad, CausalFilterBank, FilterCoefficients,
    FilterMode,
};
pub use layout::{ChannelLayout, CHANNEL_COUNT, STANDARD_16};
pub use pipeline::{analyze_recording, PipelineConfig, PrefilterSpec, WorkloadPipeline, WorkloadSample};
pub use welch::{welch_psd, PsdEstimate, Taper, WelchConfig, WelchEstimator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid band {f_low_hz}-{f_high_hz} Hz (Nyquist {nyquist_hz} Hz)")]
    InvalidBand {
        f_low_hz: f64,
        f_high_hz: f64,
        nyquist_hz: f64,
    },
    #[error("filter order {0} must be even and at least 2")]
    InvalidOrder(usize),
    #[error("unstable filter design: {0}")]
    UnstableDesign(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid window {window_s} s / step {step_s} s")]
    InvalidWindow { window_s: f64, step_s: f64 },
    #[error("sampling rate changed from {expected} Hz to {got} Hz")]
    SampleRateChanged { expected: f64, got: f64 },
    #[error("chunk starting at {got_s} s overlaps stream (expected {expected_s} s)")]
    ChunkOverlap { expected_s: f64, got_s: f64 },
    #[error("Welch segment of {segment_len} frames longer than {frames} available")]
    SegmentTooLong { segment_len: usize, frames: usize },
    #[error("invalid Welch setup: {0}")]
    InvalidWelch(String),
    #[error("band '{band}' exceeds spectrum (max {max_hz} Hz)")]
    BandOutOfRange { band: String, max_hz: f64 },
    #[error("invalid channel layout: {0}")]
    InvalidLayout(String),
    #[error("classifier used before calibration completed")]
    NotCalibrated,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}
