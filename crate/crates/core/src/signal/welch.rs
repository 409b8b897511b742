//! Welch power spectral density.
//!
//! One-sided density in µV²/Hz: each segment's periodogram is scaled by
//! `1 / (fs * sum(w²))` and every bin except DC (and Nyquist, for even
//! lengths) is doubled. With that convention `sum(P) * df` equals the mean
//! power of the tapered signal.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::chunk::Epoch;
use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Hann,
    Rectangular,
}

impl Taper {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            // periodic Hann
            Taper::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
                .collect(),
            Taper::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub taper: Taper,
}

impl WelchConfig {
    /// 1 s Hann segments with 50 % overlap.
    pub fn default_for(sampling_rate_hz: f64) -> Self {
        Self {
            segment_len: sampling_rate_hz.round() as usize,
            overlap_fraction: 0.5,
            taper: Taper::Hann,
        }
    }

    pub fn hop(&self) -> usize {
        let overlap = (self.overlap_fraction * self.segment_len as f64).round() as usize;
        (self.segment_len - overlap.min(self.segment_len - 1)).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    /// `[channel][bin]`, µV²/Hz.
    pub power: Vec<Vec<f64>>,
    pub df_hz: f64,
    pub segments: usize,
}

impl PsdEstimate {
    /// Spectral integral `sum(P) * df` per channel: the estimate's total power.
    pub fn total_power(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|row| row.iter().sum::<f64>() * self.df_hz)
            .collect()
    }

    /// Index of the largest bin per channel.
    pub fn peak_bins(&self) -> Vec<usize> {
        self.power
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(i, _)| i)
            })
            .collect()
    }
}

/// Reusable estimator; holds the FFT plan and taper for one segment length.
pub struct WelchEstimator {
    config: WelchConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    window_energy: f64,
}

impl std::fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchEstimator").field("config", &self.config).finish()
    }
}

impl WelchEstimator {
    pub fn new(config: WelchConfig) -> Result<Self, SignalError> {
        if config.segment_len < 2 {
            return Err(SignalError::InvalidWelch(format!(
                "segment length {} too short",
                config.segment_len
            )));
        }
        if !(0.0..1.0).contains(&config.overlap_fraction) {
            return Err(SignalError::InvalidWelch(format!(
                "overlap {} outside [0, 1)",
                config.overlap_fraction
            )));
        }
        let window = config.taper.coefficients(config.segment_len);
        let window_energy = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(config.segment_len);
        Ok(Self {
            config,
            fft,
            window,
            window_energy,
        })
    }

    pub fn config(&self) -> &WelchConfig {
        &self.config
    }

    pub fn bins(&self) -> usize {
        self.config.segment_len / 2 + 1
    }

    /// One-sided PSD of a single channel. Trailing samples that do not fill a
    /// whole segment are ignored.
    pub fn channel_psd(&self, signal: &[f64], sampling_rate_hz: f64) -> Result<(Vec<f64>, usize), SignalError> {
        let n = self.config.segment_len;
        if signal.len() < n {
            return Err(SignalError::SegmentTooLong {
                segment_len: n,
                frames: signal.len(),
            });
        }
        let hop = self.config.hop();
        let bins = self.bins();
        let mut acc = vec![0.0; bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut segments = 0;
        let mut start = 0;
        while start + n <= signal.len() {
            for ((dst, &x), &w) in buf.iter_mut().zip(&signal[start..start + n]).zip(&self.window) {
                *dst = Complex64::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
            segments += 1;
            start += hop;
        }
        let scale = 1.0 / (sampling_rate_hz * self.window_energy * segments as f64);
        let nyquist_bin = (n % 2 == 0).then_some(n / 2);
        for (k, a) in acc.iter_mut().enumerate() {
            *a *= scale;
            if k != 0 && Some(k) != nyquist_bin {
                *a *= 2.0;
            }
        }
        Ok((acc, segments))
    }

    pub fn estimate(&self, epoch: &Epoch) -> Result<PsdEstimate, SignalError> {
        let fs = epoch.sampling_rate_hz;
        let df = fs / self.config.segment_len as f64;
        let mut power = Vec::with_capacity(epoch.samples.len());
        let mut segments = 0;
        for row in &epoch.samples {
            let (p, s) = self.channel_psd(row, fs)?;
            power.push(p);
            segments = s;
        }
        Ok(PsdEstimate {
            freqs_hz: (0..self.bins()).map(|k| k as f64 * df).collect(),
            power,
            df_hz: df,
            segments,
        })
    }
}

pub fn welch_psd(epoch: &Epoch, config: WelchConfig) -> Result<PsdEstimate, SignalError> {
    WelchEstimator::new(config)?.estimate(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::layout::CHANNEL_COUNT;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn epoch_of(rows: Vec<Vec<f64>>, fs: f64) -> Epoch {
        Epoch {
            end_time_s: rows[0].len() as f64 / fs,
            window_s: rows[0].len() as f64 / fs,
            sampling_rate_hz: fs,
            samples: rows,
        }
    }

    fn mean_power(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn sine_power_is_half_amplitude_squared() {
        let fs = 250.0;
        let x: Vec<f64> = (0..500).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let psd = welch_psd(&epoch_of(vec![x; CHANNEL_COUNT], fs), WelchConfig::default_for(fs)).unwrap();
        assert_eq!(psd.segments, 3);
        let total = psd.total_power()[0];
        assert!((total - 0.5).abs() < 0.05 * 0.5, "total {total}");
        assert_eq!(psd.peak_bins()[0], 10);
    }

    #[test]
    fn zeros_give_zero_psd() {
        let psd = welch_psd(&epoch_of(vec![vec![0.0; 500]; CHANNEL_COUNT], 250.0), WelchConfig::default_for(250.0)).unwrap();
        assert!(psd.power.iter().flatten().all(|p| *p == 0.0));
    }

    #[test]
    fn white_noise_power_matches_variance() {
        let fs = 250.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let psd = welch_psd(&epoch_of(vec![x; CHANNEL_COUNT], fs), WelchConfig::default_for(fs)).unwrap();
        let total = psd.total_power()[0];
        assert!((total - 1.0).abs() < 0.1, "total {total}");
    }

    #[test]
    fn rectangular_single_segment_is_exact_parseval() {
        let fs = 250.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [250usize, 251] {
            let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
            let cfg = WelchConfig { segment_len: len, overlap_fraction: 0.0, taper: Taper::Rectangular };
            let psd = welch_psd(&epoch_of(vec![x.clone(); CHANNEL_COUNT], fs), cfg).unwrap();
            let rel = (psd.total_power()[0] - mean_power(&x)).abs() / mean_power(&x);
            assert!(rel < 1e-12, "len {len} rel {rel}");
        }
    }

    #[test]
    fn segment_longer_than_epoch_rejected() {
        let e = epoch_of(vec![vec![0.0; 100]; CHANNEL_COUNT], 250.0);
        assert!(matches!(
            welch_psd(&e, WelchConfig::default_for(250.0)),
            Err(SignalError::SegmentTooLong { .. })
        ));
    }

    #[test]
    fn bad_overlap_rejected() {
        let cfg = WelchConfig { segment_len: 64, overlap_fraction: 1.0, taper: Taper::Hann };
        assert!(WelchEstimator::new(cfg).is_err());
    }

    #[test]
    fn frequencies_span_to_nyquist() {
        let e = epoch_of(vec![vec![1.0; 500]; CHANNEL_COUNT], 250.0);
        let psd = welch_psd(&e, WelchConfig::default_for(250.0)).unwrap();
        assert_eq!(psd.freqs_hz.first(), Some(&0.0));
        assert_eq!(psd.freqs_hz.last(), Some(&125.0));
        assert!(psd.freqs_hz.windows(2).all(|w| w[1] > w[0]));
        assert!(psd.power.iter().flatten().all(|p| *p >= 0.0));
    }
}
