use serde::{Deserialize, Serialize};

use super::layout::CHANNEL_COUNT;
use super::SignalError;

/// A block of consecutive 16-channel frames, microvolts, channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegChunk {
    pub start_time_s: f64,
    pub sampling_rate_hz: f64,
    pub samples: Vec<Vec<f64>>,
}

impl EegChunk {
    pub fn new(
        start_time_s: f64,
        sampling_rate_hz: f64,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self, SignalError> {
        let chunk = Self {
            start_time_s,
            sampling_rate_hz,
            samples,
        };
        chunk.validate()?;
        Ok(chunk)
    }

    pub fn zeros(start_time_s: f64, sampling_rate_hz: f64, frames: usize) -> Self {
        Self {
            start_time_s,
            sampling_rate_hz,
            samples: vec![vec![0.0; frames]; CHANNEL_COUNT],
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(SignalError::ShapeMismatch(format!(
                "sampling rate {} must be positive",
                self.sampling_rate_hz
            )));
        }
        if self.samples.len() != CHANNEL_COUNT {
            return Err(SignalError::ShapeMismatch(format!(
                "expected {CHANNEL_COUNT} channels, got {}",
                self.samples.len()
            )));
        }
        let frames = self.samples[0].len();
        if frames == 0 || self.samples.iter().any(|c| c.len() != frames) {
            return Err(SignalError::ShapeMismatch(
                "channels must share a non-zero frame count".into(),
            ));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sampling_rate_hz
    }

    /// Time just past the last frame.
    pub fn end_time_s(&self) -> f64 {
        self.start_time_s + self.duration_s()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            start_time_s: self.start_time_s,
            sampling_rate_hz: self.sampling_rate_hz,
            samples: self
                .samples
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }
}

/// Concatenates contiguous chunks into one. Callers guarantee contiguity.
pub fn concat_chunks(chunks: &[EegChunk]) -> Option<EegChunk> {
    let first = chunks.first()?;
    let mut samples = vec![Vec::new(); CHANNEL_COUNT];
    for chunk in chunks {
        for (dst, src) in samples.iter_mut().zip(&chunk.samples) {
            dst.extend_from_slice(src);
        }
    }
    Some(EegChunk {
        start_time_s: first.start_time_s,
        sampling_rate_hz: first.sampling_rate_hz,
        samples,
    })
}

/// Re-cuts a contiguous recording into chunks of `frames` (the last may be shorter).
pub fn split_chunk(chunk: &EegChunk, frames: usize) -> Vec<EegChunk> {
    let frames = frames.max(1);
    (0..chunk.frames())
        .step_by(frames)
        .map(|start| {
            let end = (start + frames).min(chunk.frames());
            EegChunk {
                start_time_s: chunk.start_time_s + start as f64 / chunk.sampling_rate_hz,
                sampling_rate_hz: chunk.sampling_rate_hz,
                samples: chunk.samples.iter().map(|c| c[start..end].to_vec()).collect(),
            }
        })
        .collect()
}

/// A trailing window of filtered samples ending at `end_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub end_time_s: f64,
    pub window_s: f64,
    pub sampling_rate_hz: f64,
    pub samples: Vec<Vec<f64>>,
}

impl Epoch {
    pub fn frames(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Timestamp of the newest sample in the window.
    pub fn last_sample_time_s(&self) -> f64 {
        self.end_time_s - 1.0 / self.sampling_rate_hz
    }
}
