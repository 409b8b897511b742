use std::collections::VecDeque;

use super::chunk::{EegChunk, Epoch};
use super::SignalError;

/// Streaming sliding-window segmenter.
///
/// Emits one epoch every `step` frames once `window` frames are buffered.
/// A gap in the input (next chunk starting later than expected) restarts the
/// window, so emission resumes only after a fresh window has filled.
#[derive(Debug, Clone)]
pub struct EpochSegmenter {
    window_s: f64,
    step_s: f64,
    window_frames: usize,
    step_frames: usize,
    sampling_rate_hz: Option<f64>,
    buffers: Vec<VecDeque<f64>>,
    anchor_time_s: f64,
    frames_since_anchor: u64,
    next_expected_s: Option<f64>,
}

impl EpochSegmenter {
    pub fn new(window_s: f64, step_s: f64) -> Result<Self, SignalError> {
        if !(window_s > 0.0 && step_s > 0.0 && step_s <= window_s) {
            return Err(SignalError::InvalidWindow { window_s, step_s });
        }
        Ok(Self {
            window_s,
            step_s,
            window_frames: 0,
            step_frames: 0,
            sampling_rate_hz: None,
            buffers: Vec::new(),
            anchor_time_s: 0.0,
            frames_since_anchor: 0,
            next_expected_s: None,
        })
    }

    fn init(&mut self, fs: f64, channels: usize) {
        self.sampling_rate_hz = Some(fs);
        self.window_frames = ((self.window_s * fs).round() as usize).max(1);
        self.step_frames = ((self.step_s * fs).round() as usize).max(1);
        self.buffers = vec![VecDeque::with_capacity(self.window_frames); channels];
    }

    fn restart(&mut self, at_s: f64) {
        self.anchor_time_s = at_s;
        self.frames_since_anchor = 0;
        self.buffers.iter_mut().for_each(VecDeque::clear);
    }

    pub fn push(&mut self, chunk: &EegChunk) -> Result<Vec<Epoch>, SignalError> {
        let fs = chunk.sampling_rate_hz;
        match self.sampling_rate_hz {
            None => {
                self.init(fs, chunk.samples.len());
                self.restart(chunk.start_time_s);
            }
            Some(prev) if (prev - fs).abs() > 1e-9 => {
                return Err(SignalError::SampleRateChanged { expected: prev, got: fs });
            }
            Some(_) => {}
        }
        if chunk.samples.len() != self.buffers.len() {
            return Err(SignalError::ShapeMismatch(format!(
                "stream has {} channels, chunk has {}",
                self.buffers.len(),
                chunk.samples.len()
            )));
        }
        let half_frame = 0.5 / fs;
        if let Some(expected) = self.next_expected_s {
            if chunk.start_time_s < expected - half_frame {
                return Err(SignalError::ChunkOverlap {
                    expected_s: expected,
                    got_s: chunk.start_time_s,
                });
            }
            if chunk.start_time_s > expected + half_frame {
                self.restart(chunk.start_time_s);
            }
        }
        self.next_expected_s = Some(chunk.end_time_s());

        let mut epochs = Vec::new();
        for frame in 0..chunk.frames() {
            for (buf, row) in self.buffers.iter_mut().zip(&chunk.samples) {
                if buf.len() == self.window_frames {
                    buf.pop_front();
                }
                buf.push_back(row[frame]);
            }
            self.frames_since_anchor += 1;
            let n = self.frames_since_anchor;
            let w = self.window_frames as u64;
            if n >= w && (n - w) % self.step_frames as u64 == 0 {
                epochs.push(Epoch {
                    end_time_s: self.anchor_time_s + n as f64 / fs,
                    window_s: self.window_s,
                    sampling_rate_hz: fs,
                    samples: self.buffers.iter().map(|b| b.iter().copied().collect()).collect(),
                });
            }
        }
        Ok(epochs)
    }
}

/// Batch helper over a finite stream.
pub fn segment_epochs<'a>(
    chunks: impl IntoIterator<Item = &'a EegChunk>,
    window_s: f64,
    step_s: f64,
) -> Result<Vec<Epoch>, SignalError> {
    let mut seg = EpochSegmenter::new(window_s, step_s)?;
    let mut out = Vec::new();
    for chunk in chunks {
        out.extend(seg.push(chunk)?);
    }
    Ok(out)
}
