//! Chunk-in, workload-sample-out processing chain.

use serde::{Deserialize, Serialize};

use super::band::{band_power, workload_index, BandDefinition};
use super::chunk::{concat_chunks, EegChunk, Epoch};
use super::classify::{
    detect_artifact, CalibrationState, Calibrator, Classifier, WorkloadClass,
    DEFAULT_ARTIFACT_THRESHOLD_UV, DEFAULT_CALIBRATION_EPOCHS, DEFAULT_HYSTERESIS_EPOCHS,
    DEFAULT_THRESHOLD_RATIO,
};
use super::epoch::EpochSegmenter;
use super::filter::{design_bandpass, filtfilt, CausalFilterBank, FilterCoefficients, FilterMode};
use super::layout::ChannelLayout;
use super::welch::{Taper, WelchConfig, WelchEstimator};
use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefilterSpec {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub layout: ChannelLayout,
    pub sampling_rate_hz: f64,
    pub prefilter: Option<PrefilterSpec>,
    pub filter_mode: FilterMode,
    pub window_s: f64,
    pub step_s: f64,
    pub welch_segment_s: f64,
    pub welch_overlap: f64,
    pub theta: BandDefinition,
    pub alpha: BandDefinition,
    pub artifact_threshold_uv: f64,
    pub calibration_epochs: usize,
    pub threshold_ratio: f64,
    pub hysteresis_epochs: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            layout: ChannelLayout::standard16(),
            sampling_rate_hz: 250.0,
            prefilter: Some(PrefilterSpec {
                f_low_hz: 1.0,
                f_high_hz: 40.0,
                order: 10,
            }),
            filter_mode: FilterMode::Causal,
            window_s: 2.0,
            step_s: 0.5,
            welch_segment_s: 1.0,
            welch_overlap: 0.5,
            theta: BandDefinition::theta(),
            alpha: BandDefinition::alpha(),
            artifact_threshold_uv: DEFAULT_ARTIFACT_THRESHOLD_UV,
            calibration_epochs: DEFAULT_CALIBRATION_EPOCHS,
            threshold_ratio: DEFAULT_THRESHOLD_RATIO,
            hysteresis_epochs: DEFAULT_HYSTERESIS_EPOCHS,
        }
    }
}

impl PipelineConfig {
    pub fn welch(&self) -> WelchConfig {
        WelchConfig {
            segment_len: (self.welch_segment_s * self.sampling_rate_hz).round() as usize,
            overlap_fraction: self.welch_overlap,
            taper: Taper::Hann,
        }
    }

    pub fn prefilter_coefficients(&self) -> Result<Option<FilterCoefficients>, SignalError> {
        self.prefilter
            .map(|p| design_bandpass(p.f_low_hz, p.f_high_hz, self.sampling_rate_hz, p.order))
            .transpose()
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        self.layout.validate()?;
        self.theta.check_rate(self.sampling_rate_hz)?;
        self.alpha.check_rate(self.sampling_rate_hz)?;
        if !(self.artifact_threshold_uv > 0.0) {
            return Err(SignalError::InvalidConfig(format!(
                "artifact threshold {} must be positive",
                self.artifact_threshold_uv
            )));
        }
        if !(self.threshold_ratio > 0.0) {
            return Err(SignalError::InvalidConfig(format!(
                "threshold ratio {} must be positive",
                self.threshold_ratio
            )));
        }
        let welch = self.welch();
        let window_frames = (self.window_s * self.sampling_rate_hz).round() as usize;
        if welch.segment_len > window_frames {
            return Err(SignalError::SegmentTooLong {
                segment_len: welch.segment_len,
                frames: window_frames,
            });
        }
        WelchEstimator::new(welch)?;
        EpochSegmenter::new(self.window_s, self.step_s)?;
        self.prefilter_coefficients()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSample {
    pub end_time_s: f64,
    pub frontal_theta_power: f64,
    pub parietal_alpha_power: f64,
    pub index: f64,
    /// `index / baseline`; absent until calibration completes.
    pub relative_index: Option<f64>,
    pub class: WorkloadClass,
    pub artifact: bool,
    pub calibrated: bool,
    pub degenerate_alpha: bool,
}

/// Per-epoch analysis shared by the streaming and offline paths: PSD, band
/// powers, index, calibration and debounced classification.
struct EpochScorer {
    config: PipelineConfig,
    welch: WelchEstimator,
    calibrator: Calibrator,
    classifier: Classifier,
}

impl EpochScorer {
    fn new(config: PipelineConfig) -> Result<Self, SignalError> {
        config.validate()?;
        Ok(Self {
            welch: WelchEstimator::new(config.welch())?,
            calibrator: Calibrator::new(config.calibration_epochs),
            classifier: Classifier::new(config.threshold_ratio, config.hysteresis_epochs),
            config,
        })
    }

    fn score(&mut self, epoch: &Epoch) -> Result<WorkloadSample, SignalError> {
        let artifact = detect_artifact(epoch, self.config.artifact_threshold_uv);
        let psd = self.welch.estimate(epoch)?;
        let theta = band_power(&psd, &self.config.theta)?;
        let alpha = band_power(&psd, &self.config.alpha)?;
        let value = workload_index(&theta, &alpha, &self.config.layout);

        let mut calibration = self.calibrator.state();
        let class = if artifact {
            // hold the last valid class
            self.classifier.current()
        } else {
            calibration = self.calibrator.observe(value.index);
            if calibration.complete {
                self.classifier.classify(value.index, &calibration)?
            } else {
                WorkloadClass::Nominal
            }
        };
        Ok(WorkloadSample {
            end_time_s: epoch.end_time_s,
            frontal_theta_power: value.frontal_theta,
            parietal_alpha_power: value.parietal_alpha,
            index: value.index,
            relative_index: calibration
                .complete
                .then(|| value.index / calibration.baseline_index),
            class,
            artifact,
            calibrated: calibration.complete,
            degenerate_alpha: value.degenerate_alpha,
        })
    }

    fn calibration(&self) -> CalibrationState {
        self.calibrator.state()
    }
}

/// Real-time pipeline: causal filtering, state persists across chunks.
pub struct WorkloadPipeline {
    filter: Option<CausalFilterBank>,
    segmenter: EpochSegmenter,
    scorer: EpochScorer,
}

impl WorkloadPipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, SignalError> {
        if config.filter_mode != FilterMode::Causal {
            return Err(SignalError::InvalidConfig(
                "streaming pipeline requires causal filtering".into(),
            ));
        }
        let filter = config
            .prefilter_coefficients()?
            .map(|c| CausalFilterBank::new(c, config.layout.channel_names.len()));
        Ok(Self {
            filter,
            segmenter: EpochSegmenter::new(config.window_s, config.step_s)?,
            scorer: EpochScorer::new(config)?,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.scorer.config
    }

    pub fn calibration(&self) -> CalibrationState {
        self.scorer.calibration()
    }

    pub fn push(&mut self, chunk: &EegChunk) -> Result<Vec<WorkloadSample>, SignalError> {
        chunk.validate()?;
        let expected = self.scorer.config.sampling_rate_hz;
        if (chunk.sampling_rate_hz - expected).abs() > 1e-9 {
            return Err(SignalError::SampleRateChanged {
                expected,
                got: chunk.sampling_rate_hz,
            });
        }
        let filtered = match &mut self.filter {
            Some(bank) => bank.process(chunk)?,
            None => chunk.clone(),
        };
        self.segmenter
            .push(&filtered)?
            .iter()
            .map(|e| self.scorer.score(e))
            .collect()
    }
}

/// Offline analysis of a finished recording. Contiguous runs are filtered
/// forward-backward when `filter_mode` is zero-phase; a gap splits runs.
pub fn analyze_recording(
    config: PipelineConfig,
    chunks: &[EegChunk],
) -> Result<Vec<WorkloadSample>, SignalError> {
    if config.filter_mode == FilterMode::Causal {
        let mut pipeline = WorkloadPipeline::new(config)?;
        let mut out = Vec::new();
        for c in chunks {
            out.extend(pipeline.push(c)?);
        }
        return Ok(out);
    }

    let coeffs = config.prefilter_coefficients()?;
    let mut segmenter = EpochSegmenter::new(config.window_s, config.step_s)?;
    let mut scorer = EpochScorer::new(config)?;
    let mut out = Vec::new();
    for run in contiguous_runs(chunks) {
        let Some(mut joined) = concat_chunks(run) else { continue };
        joined.validate()?;
        if let Some(c) = &coeffs {
            for row in joined.samples.iter_mut() {
                *row = filtfilt(c, row);
            }
        }
        for epoch in segmenter.push(&joined)? {
            out.push(scorer.score(&epoch)?);
        }
    }
    Ok(out)
}

fn contiguous_runs(chunks: &[EegChunk]) -> Vec<&[EegChunk]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..chunks.len() {
        let prev = &chunks[i - 1];
        let half_frame = 0.5 / prev.sampling_rate_hz;
        if (chunks[i].start_time_s - prev.end_time_s()).abs() > half_frame {
            runs.push(&chunks[start..i]);
            start = i;
        }
    }
    if start < chunks.len() {
        runs.push(&chunks[start..]);
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::chunk::split_chunk;
    use crate::signal::layout::CHANNEL_COUNT;
    use std::f64::consts::PI;

    fn synthetic(seconds: f64, theta_amp: f64, alpha_amp: f64) -> EegChunk {
        let fs = 250.0;
        let layout = ChannelLayout::standard16();
        let frames = (seconds * fs) as usize;
        let mut c = EegChunk::zeros(0.0, fs, frames);
        for (ch, row) in c.samples.iter_mut().enumerate() {
            for (i, v) in row.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let th = if layout.is_frontal(ch) { theta_amp } else { 2.0 };
                let al = if layout.is_parietal(ch) { alpha_amp } else { 2.0 };
                *v = th * (2.0 * PI * 6.0 * t + ch as f64).sin()
                    + al * (2.0 * PI * 10.0 * t + 0.3 * ch as f64).sin()
                    + 0.5 * (2.0 * PI * 23.0 * t).sin();
            }
        }
        c
    }

    #[test]
    fn emits_on_schedule_and_calibrates() {
        let c = synthetic(20.0, 5.0, 20.0);
        let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
        let mut samples = Vec::new();
        for piece in split_chunk(&c, 25) {
            samples.extend(p.push(&piece).unwrap());
        }
        assert_eq!(samples.len(), 37);
        assert!((samples[0].end_time_s - 2.0).abs() < 1e-9);
        assert!(!samples[18].calibrated && samples[19].calibrated);
        assert!(samples.iter().all(|s| s.index > 0.0 && !s.artifact));
        assert!(samples.iter().all(|s| s.class == WorkloadClass::Nominal));
        let rel = samples.last().unwrap().relative_index.unwrap();
        assert!((rel - 1.0).abs() < 0.05, "{rel}");
    }

    #[test]
    fn artifact_epochs_hold_class_and_skip_calibration() {
        let mut c = synthetic(20.0, 5.0, 20.0);
        for row in c.samples.iter_mut() {
            row[250 * 5] += 800.0;
        }
        let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
        let samples = p.push(&c).unwrap();
        let flagged: Vec<_> = samples.iter().filter(|s| s.artifact).collect();
        assert!(!flagged.is_empty());
        assert!(flagged.iter().all(|s| s.class == WorkloadClass::Nominal));
        let first_calibrated = samples.iter().position(|s| s.calibrated).unwrap();
        assert_eq!(first_calibrated, 19 + flagged.iter().filter(|s| s.end_time_s < samples[first_calibrated].end_time_s).count());
    }

    #[test]
    fn overload_detected_after_load_rise() {
        let calm = synthetic(15.0, 5.0, 20.0);
        let mut load = synthetic(15.0, 20.0, 5.0);
        load.start_time_s = 15.0;
        let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
        let mut samples = Vec::new();
        for piece in split_chunk(&calm, 50).iter().chain(split_chunk(&load, 50).iter()) {
            samples.extend(p.push(piece).unwrap());
        }
        let last = samples.last().unwrap();
        assert_eq!(last.class, WorkloadClass::Overload);
        assert!(last.relative_index.unwrap() > 1.5);
    }

    #[test]
    fn zero_phase_offline_runs() {
        let c = synthetic(12.0, 5.0, 20.0);
        let cfg = PipelineConfig { filter_mode: FilterMode::ZeroPhase, ..PipelineConfig::default() };
        let samples = analyze_recording(cfg, &split_chunk(&c, 100)).unwrap();
        assert_eq!(samples.len(), 21);
        assert!(samples.iter().all(|s| !s.artifact));
    }

    #[test]
    fn streaming_rejects_zero_phase_and_bad_rate() {
        let cfg = PipelineConfig { filter_mode: FilterMode::ZeroPhase, ..PipelineConfig::default() };
        assert!(WorkloadPipeline::new(cfg).is_err());
        let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
        assert!(p.push(&EegChunk::zeros(0.0, 500.0, 10)).is_err());
        assert!(p.push(&EegChunk { samples: vec![vec![0.0; 3]; CHANNEL_COUNT - 1], ..EegChunk::zeros(0.0, 250.0, 3) }).is_err());
    }
}
