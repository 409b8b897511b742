//! Synthetic 16-channel EEG whose markers follow a scripted workload level,
//! plus CSV recording and replay.

mod csvio;
mod generator;
mod noise;
mod script;

use thiserror::Error;

pub use csvio::{
    format_significant, read_eeg_csv, read_eeg_csv_file, replay, write_eeg_csv, write_eeg_csv_file,
    EegRecording, Replay, SIGNIFICANT_DIGITS,
};
pub use generator::{
    generate, inject_artifacts, ArtifactInjector, EegGenerator, GeneratorParams, SpikeTrain,
    ALPHA_CARRIER_HZ, SPIKE_DURATION_S, THETA_CARRIER_HZ,
};
pub use noise::PinkNoise;
pub use script::{LevelStep, WorkloadScript, DEFAULT_SCRIPT_DURATION_S, LEVEL_RAMP_S};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid workload script: {0}")]
    InvalidScript(String),
    #[error("invalid generator params: {0}")]
    InvalidParams(String),
    #[error("malformed EEG file at line {line}, column {column}: {reason}")]
    MalformedFile {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("missing EEG file metadata: {0}")]
    MissingMetadata(String),
    #[error("i/o error: {0}")]
    Io(String),
}
