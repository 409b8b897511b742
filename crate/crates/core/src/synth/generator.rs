use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::noise::PinkNoise;
use super::script::WorkloadScript;
use super::SynthError;
use crate::signal::{ChannelLayout, EegChunk};

pub const THETA_CARRIER_HZ: f64 = 6.0;
pub const ALPHA_CARRIER_HZ: f64 = 10.0;
pub const SPIKE_DURATION_S: f64 = 0.1;

// RNG stream ids; channel c's noise uses NOISE_STREAM_BASE + c.
const PHASE_STREAM: u64 = 1;
const ARTIFACT_STREAM: u64 = 2;
const NOISE_STREAM_BASE: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub layout: ChannelLayout,
    pub sampling_rate_hz: f64,
    pub seed: u64,
    /// Frontal theta amplitude at level 0 and level 1, µV.
    pub theta_amp_range: [f64; 2],
    /// Parietal alpha amplitude at level 0 and level 1, µV.
    pub alpha_amp_range: [f64; 2],
    pub noise_sigma_uv: f64,
    pub pink_exponent: f64,
    pub artifact_rate_per_min: f64,
    pub artifact_magnitude_uv: f64,
    pub chunk_frames: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            layout: ChannelLayout::standard16(),
            sampling_rate_hz: 250.0,
            seed: 0,
            theta_amp_range: [5.0, 20.0],
            alpha_amp_range: [20.0, 5.0],
            noise_sigma_uv: 10.0,
            pink_exponent: 1.0,
            artifact_rate_per_min: 0.0,
            artifact_magnitude_uv: 500.0,
            chunk_frames: 25,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        self.layout
            .validate()
            .map_err(|e| SynthError::InvalidParams(e.to_string()))?;
        if !(self.sampling_rate_hz > 2.0 * ALPHA_CARRIER_HZ && self.sampling_rate_hz.is_finite()) {
            return bad(format!("sampling rate {} Hz too low", self.sampling_rate_hz));
        }
        if self.theta_amp_range.iter().chain(&self.alpha_amp_range).any(|a| !(*a > 0.0)) {
            return bad("amplitude ranges must be positive".into());
        }
        if self.theta_amp_range[0] > self.theta_amp_range[1] {
            return bad("theta amplitude must not fall with level".into());
        }
        if self.alpha_amp_range[0] < self.alpha_amp_range[1] {
            return bad("alpha amplitude must not rise with level".into());
        }
        if !(self.noise_sigma_uv >= 0.0) {
            return bad(format!("noise sigma {} negative", self.noise_sigma_uv));
        }
        if !(0.0..=2.0).contains(&self.pink_exponent) {
            return bad(format!("pink exponent {} outside [0, 2]", self.pink_exponent));
        }
        if !(self.artifact_rate_per_min >= 0.0) || !(self.artifact_magnitude_uv >= 0.0) {
            return bad("artifact rate and magnitude must be non-negative".into());
        }
        if self.chunk_frames == 0 {
            return bad("chunk_frames must be positive".into());
        }
        Ok(())
    }

    /// Theta amplitude for `channel` at `level`; non-frontal channels sit at the range minimum.
    pub fn theta_amplitude(&self, channel: usize, level: f64) -> f64 {
        let [lo, hi] = self.theta_amp_range;
        if self.layout.is_frontal(channel) {
            lo + (hi - lo) * level
        } else {
            lo.min(hi)
        }
    }

    /// Alpha amplitude for `channel` at `level`; non-parietal channels sit at the range minimum.
    pub fn alpha_amplitude(&self, channel: usize, level: f64) -> f64 {
        let [rest, load] = self.alpha_amp_range;
        if self.layout.is_parietal(channel) {
            rest + (load - rest) * level
        } else {
            rest.min(load)
        }
    }
}

/// Poisson-timed half-sine spikes, shared by every channel.
#[derive(Debug, Clone)]
pub struct SpikeTrain {
    magnitude_uv: f64,
    rng: ChaCha8Rng,
    gaps: Option<Exp<f64>>,
    next_onset_s: f64,
    active: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(rate_per_min: f64, magnitude_uv: f64, rng: ChaCha8Rng) -> Self {
        assert!(rate_per_min >= 0.0, "spike rate must be non-negative");
        let gaps = (rate_per_min > 0.0).then(|| Exp::new(rate_per_min / 60.0).expect("positive rate"));
        let mut train = Self {
            magnitude_uv,
            rng,
            gaps,
            next_onset_s: 0.0,
            active: Vec::new(),
        };
        train.next_onset_s = train.draw_gap();
        train
    }

    pub fn from_seed(rate_per_min: f64, magnitude_uv: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ARTIFACT_STREAM);
        Self::new(rate_per_min, magnitude_uv, rng)
    }

    fn draw_gap(&mut self) -> f64 {
        match &self.gaps {
            Some(d) => d.sample(&mut self.rng),
            None => f64::INFINITY,
        }
    }

    /// Spike value at `t`; calls must be made with non-decreasing `t`.
    pub fn value_at(&mut self, t: f64) -> f64 {
        while self.next_onset_s <= t {
            self.active.push(self.next_onset_s);
            let gap = self.draw_gap();
            self.next_onset_s += gap;
        }
        self.active.retain(|&t0| t - t0 < SPIKE_DURATION_S);
        self.active
            .iter()
            .map(|&t0| self.magnitude_uv * (PI * (t - t0) / SPIKE_DURATION_S).sin())
            .sum()
    }

    /// Onset times in `[0, duration_s)`, consuming a fresh copy of the train.
    pub fn onsets(&self, duration_s: f64) -> Vec<f64> {
        let mut probe = self.clone();
        let mut out: Vec<f64> = probe.active.clone();
        while probe.next_onset_s < duration_s {
            out.push(probe.next_onset_s);
            let gap = probe.draw_gap();
            probe.next_onset_s += gap;
        }
        out
    }
}

/// Pull-based generator; a pure function of `(script, params)`.
#[derive(Debug, Clone)]
pub struct EegGenerator {
    script: WorkloadScript,
    params: GeneratorParams,
    theta_phase: Vec<f64>,
    alpha_phase: Vec<f64>,
    noise: Vec<PinkNoise>,
    spikes: SpikeTrain,
    next_frame: usize,
    total_frames: usize,
}

impl EegGenerator {
    pub fn new(script: WorkloadScript, params: GeneratorParams) -> Result<Self, SynthError> {
        script.validate()?;
        params.validate()?;
        let channels = params.layout.channel_names.len();
        let mut phase_rng = ChaCha8Rng::seed_from_u64(params.seed);
        phase_rng.set_stream(PHASE_STREAM);
        let theta_phase = (0..channels).map(|_| phase_rng.gen_range(0.0..2.0 * PI)).collect();
        let alpha_phase = (0..channels).map(|_| phase_rng.gen_range(0.0..2.0 * PI)).collect();
        let noise = (0..channels)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(NOISE_STREAM_BASE + c as u64);
                PinkNoise::new(params.noise_sigma_uv, params.pink_exponent, params.sampling_rate_hz, rng)
            })
            .collect();
        let spikes = SpikeTrain::from_seed(params.artifact_rate_per_min, params.artifact_magnitude_uv, params.seed);
        let total_frames = (script.duration_s * params.sampling_rate_hz).round() as usize;
        Ok(Self {
            script,
            params,
            theta_phase,
            alpha_phase,
            noise,
            spikes,
            next_frame: 0,
            total_frames,
        })
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    pub fn script(&self) -> &WorkloadScript {
        &self.script
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    /// Onset times of the artifact spikes this generator will add.
    pub fn artifact_onsets(&self) -> Vec<f64> {
        SpikeTrain::from_seed(
            self.params.artifact_rate_per_min,
            self.params.artifact_magnitude_uv,
            self.params.seed,
        )
        .onsets(self.script.duration_s)
    }

    /// Up to `frames` more frames; `None` once the script is exhausted.
    pub fn next_chunk_of(&mut self, frames: usize) -> Option<EegChunk> {
        if self.next_frame >= self.total_frames {
            return None;
        }
        let fs = self.params.sampling_rate_hz;
        let n = frames.min(self.total_frames - self.next_frame);
        let start = self.next_frame;
        let mut chunk = EegChunk::zeros(start as f64 / fs, fs, n);
        chunk.samples = vec![vec![0.0; n]; self.noise.len()];
        for i in 0..n {
            // same expression the injector uses, so spikes land bit-identically
            let t = chunk.start_time_s + i as f64 / fs;
            let level = self.script.level_at(t);
            let spike = self.spikes.value_at(t);
            for (c, row) in chunk.samples.iter_mut().enumerate() {
                let theta = self.params.theta_amplitude(c, level)
                    * (2.0 * PI * THETA_CARRIER_HZ * t + self.theta_phase[c]).sin();
                let alpha = self.params.alpha_amplitude(c, level)
                    * (2.0 * PI * ALPHA_CARRIER_HZ * t + self.alpha_phase[c]).sin();
                row[i] = theta + alpha + self.noise[c].next_sample() + spike;
            }
        }
        self.next_frame += n;
        Some(chunk)
    }
}

impl Iterator for EegGenerator {
    type Item = EegChunk;

    fn next(&mut self) -> Option<EegChunk> {
        let frames = self.params.chunk_frames;
        self.next_chunk_of(frames)
    }
}

pub fn generate(script: WorkloadScript, params: GeneratorParams) -> Result<EegGenerator, SynthError> {
    EegGenerator::new(script, params)
}

/// Adds the same spike train to every channel of a chunk stream.
pub struct ArtifactInjector<I> {
    inner: I,
    spikes: SpikeTrain,
}

impl<I: Iterator<Item = EegChunk>> Iterator for ArtifactInjector<I> {
    type Item = EegChunk;

    fn next(&mut self) -> Option<EegChunk> {
        let mut chunk = self.inner.next()?;
        let fs = chunk.sampling_rate_hz;
        for i in 0..chunk.frames() {
            let v = self.spikes.value_at(chunk.start_time_s + i as f64 / fs);
            if v != 0.0 {
                for row in chunk.samples.iter_mut() {
                    row[i] += v;
                }
            }
        }
        Some(chunk)
    }
}

pub fn inject_artifacts<I: Iterator<Item = EegChunk>>(
    stream: I,
    rate_per_min: f64,
    magnitude_uv: f64,
    seed: u64,
) -> ArtifactInjector<I> {
    ArtifactInjector {
        inner: stream,
        spikes: SpikeTrain::from_seed(rate_per_min, magnitude_uv, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{concat_chunks, design_bandpass, filtfilt};

    fn quiet() -> GeneratorParams {
        GeneratorParams { noise_sigma_uv: 0.0, ..GeneratorParams::default() }
    }

    fn collect(script: WorkloadScript, params: GeneratorParams) -> EegChunk {
        let chunks: Vec<_> = generate(script, params).unwrap().collect();
        concat_chunks(&chunks).unwrap()
    }

    /// Amplitude of the `freq` component by projection onto sin/cos.
    fn amplitude_at(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let w = 2.0 * PI * freq * i as f64 / fs;
            s += v * w.sin();
            c += v * w.cos();
        }
        2.0 * (s * s + c * c).sqrt() / x.len() as f64
    }

    #[test]
    fn level_zero_noise_free_amplitudes() {
        let p = quiet();
        let layout = p.layout.clone();
        let x = collect(WorkloadScript::constant(0.0, 4.0).unwrap(), p);
        assert_eq!(x.frames(), 1000);
        let pz = layout.channel_index("Pz").unwrap();
        let fz = layout.channel_index("Fz").unwrap();
        assert!((amplitude_at(&x.samples[pz], 10.0, 250.0) - 20.0).abs() < 1e-9);
        assert!((amplitude_at(&x.samples[pz], 6.0, 250.0) - 5.0).abs() < 1e-9);
        assert!((amplitude_at(&x.samples[fz], 6.0, 250.0) - 5.0).abs() < 1e-9);
        assert!((amplitude_at(&x.samples[fz], 10.0, 250.0) - 5.0).abs() < 1e-9);
        // nothing else in the signal
        let residual: f64 = x.samples[pz].iter().map(|v| v * v).sum::<f64>() / 1000.0;
        assert!((residual - (20.0f64.powi(2) + 5.0f64.powi(2)) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn level_one_noise_free_amplitudes() {
        let p = quiet();
        let layout = p.layout.clone();
        let x = collect(WorkloadScript::constant(1.0, 4.0).unwrap(), p);
        let pz = layout.channel_index("Pz").unwrap();
        let fz = layout.channel_index("Fz").unwrap();
        assert!((amplitude_at(&x.samples[fz], 6.0, 250.0) - 20.0).abs() < 1e-9);
        assert!((amplitude_at(&x.samples[pz], 10.0, 250.0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = WorkloadScript::step(3.0, 6.0).unwrap();
        let a = collect(s.clone(), GeneratorParams::default());
        let b = collect(s.clone(), GeneratorParams::default());
        assert_eq!(a, b);
        let c = collect(s, GeneratorParams { seed: 1, ..GeneratorParams::default() });
        assert_ne!(a, c);
    }

    #[test]
    fn chunking_follows_params() {
        let g = generate(WorkloadScript::constant(0.0, 1.01).unwrap(), GeneratorParams::default()).unwrap();
        let chunks: Vec<_> = g.collect();
        assert_eq!(chunks.len(), 11);
        assert_eq!(chunks[0].frames(), 25);
        assert_eq!(chunks[10].frames(), 3);
        assert!((chunks[1].start_time_s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn frontal_theta_rises_after_step() {
        let p = GeneratorParams::default();
        let fz = p.layout.channel_index("Fz").unwrap();
        let x = collect(WorkloadScript::step(60.0, 120.0).unwrap(), p);
        let band = design_bandpass(4.0, 8.0, 250.0, 4).unwrap();
        let theta = filtfilt(&band, &x.samples[fz]);
        let rms = |a: usize, b: usize| (theta[a..b].iter().map(|v| v * v).sum::<f64>() / (b - a) as f64).sqrt();
        let before = rms(250 * 10, 250 * 58);
        let after = rms(250 * 62, 250 * 110);
        assert!(after > before, "before {before} after {after}");
    }

    #[test]
    fn injector_rate_zero_is_identity() {
        let s = WorkloadScript::constant(0.5, 3.0).unwrap();
        let plain: Vec<_> = generate(s.clone(), GeneratorParams::default()).unwrap().collect();
        let injected: Vec<_> = inject_artifacts(plain.clone().into_iter(), 0.0, 500.0, 9).collect();
        assert_eq!(plain, injected);
    }

    #[test]
    fn spike_shape() {
        let mut train = SpikeTrain::from_seed(6.0, 500.0, 3);
        let onsets = train.onsets(1000.0);
        let onset = onsets[0];
        assert!(onsets[1] > onset + 0.2);
        assert_eq!(train.value_at(onset - 1e-6), 0.0);
        assert!((train.value_at(onset + 0.025) - 500.0 * (PI / 4.0).sin()).abs() < 1e-9);
        assert!((train.value_at(onset + 0.05) - 500.0).abs() < 1e-9);
        assert_eq!(train.value_at(onset + 0.1 + 1e-9), 0.0);
    }

    #[test]
    fn injector_matches_generator_spikes() {
        let s = WorkloadScript::constant(0.0, 20.0).unwrap();
        let with = GeneratorParams { artifact_rate_per_min: 30.0, ..quiet() };
        let a: Vec<_> = generate(s.clone(), with).unwrap().collect();
        let plain: Vec<_> = generate(s, quiet()).unwrap().collect();
        let b: Vec<_> = inject_artifacts(plain.into_iter(), 30.0, 500.0, 0).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_params_rejected() {
        let s = WorkloadScript::constant(0.0, 1.0).unwrap();
        for p in [
            GeneratorParams { pink_exponent: 2.5, ..GeneratorParams::default() },
            GeneratorParams { theta_amp_range: [0.0, 20.0], ..GeneratorParams::default() },
            GeneratorParams { alpha_amp_range: [5.0, 20.0], ..GeneratorParams::default() },
            GeneratorParams { chunk_frames: 0, ..GeneratorParams::default() },
        ] {
            assert!(matches!(generate(s.clone(), p), Err(SynthError::InvalidParams(_))));
        }
    }
}
