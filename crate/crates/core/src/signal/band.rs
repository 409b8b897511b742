use serde::{Deserialize, Serialize};

use super::layout::ChannelLayout;
use super::welch::PsdEstimate;
use super::SignalError;

/// Floor applied to parietal alpha power before division, µV².
pub const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
}

impl BandDefinition {
    pub fn new(name: impl Into<String>, f_low_hz: f64, f_high_hz: f64) -> Result<Self, SignalError> {
        if !(f_low_hz > 0.0 && f_low_hz < f_high_hz && f_high_hz.is_finite()) {
            return Err(SignalError::InvalidBand {
                f_low_hz,
                f_high_hz,
                nyquist_hz: f64::INFINITY,
            });
        }
        Ok(Self {
            name: name.into(),
            f_low_hz,
            f_high_hz,
        })
    }

    pub fn theta() -> Self {
        Self::new("theta", 4.0, 8.0).expect("static band")
    }

    pub fn alpha() -> Self {
        Self::new("alpha", 8.0, 12.0).expect("static band")
    }

    pub fn check_rate(&self, sampling_rate_hz: f64) -> Result<(), SignalError> {
        let nyquist = sampling_rate_hz / 2.0;
        if self.f_high_hz < nyquist {
            Ok(())
        } else {
            Err(SignalError::InvalidBand {
                f_low_hz: self.f_low_hz,
                f_high_hz: self.f_high_hz,
                nyquist_hz: nyquist,
            })
        }
    }
}

/// Integral of the linearly interpolated PSD over the band, per channel.
pub fn band_power(psd: &PsdEstimate, band: &BandDefinition) -> Result<Vec<f64>, SignalError> {
    let top = psd.freqs_hz.last().copied().unwrap_or(0.0);
    if band.f_low_hz < 0.0 || band.f_high_hz > top {
        return Err(SignalError::BandOutOfRange {
            band: band.name.clone(),
            max_hz: top,
        });
    }
    Ok(psd
        .power
        .iter()
        .map(|row| integrate_linear(&psd.freqs_hz, row, band.f_low_hz, band.f_high_hz).max(0.0))
        .collect())
}

fn integrate_linear(freqs: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    let mut area = 0.0;
    for k in 0..freqs.len().saturating_sub(1) {
        let (f0, f1) = (freqs[k], freqs[k + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let at = |f: f64| values[k] + (values[k + 1] - values[k]) * (f - f0) / (f1 - f0);
        area += 0.5 * (at(a) + at(b)) * (b - a);
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub frontal_theta: f64,
    pub parietal_alpha: f64,
    pub index: f64,
    /// The alpha floor kicked in.
    pub degenerate_alpha: bool,
}

/// Frontal theta over parietal alpha. Rises with both load markers.
pub fn workload_index(theta_power: &[f64], alpha_power: &[f64], layout: &ChannelLayout) -> IndexValue {
    let mean_over = |p: &[f64], set: &[usize]| set.iter().map(|&c| p[c]).sum::<f64>() / set.len() as f64;
    let frontal_theta = mean_over(theta_power, &layout.frontal_set);
    let parietal_alpha = mean_over(alpha_power, &layout.parietal_set);
    let degenerate_alpha = parietal_alpha < ALPHA_FLOOR;
    IndexValue {
        frontal_theta,
        parietal_alpha,
        index: frontal_theta / parietal_alpha.max(ALPHA_FLOOR),
        degenerate_alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::chunk::Epoch;
    use crate::signal::layout::CHANNEL_COUNT;
    use crate::signal::welch::{welch_psd, WelchConfig};
    use std::f64::consts::PI;

    fn sine_psd(freq: f64) -> PsdEstimate {
        let fs = 250.0;
        let x: Vec<f64> = (0..500).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
        let e = Epoch {
            end_time_s: 2.0,
            window_s: 2.0,
            sampling_rate_hz: fs,
            samples: vec![x; CHANNEL_COUNT],
        };
        welch_psd(&e, WelchConfig::default_for(fs)).unwrap()
    }

    #[test]
    fn zero_psd_zero_power() {
        let mut psd = sine_psd(10.0);
        psd.power.iter_mut().flatten().for_each(|p| *p = 0.0);
        assert!(band_power(&psd, &BandDefinition::alpha()).unwrap().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn alpha_sine_lands_in_alpha() {
        let psd = sine_psd(10.0);
        let top = *psd.freqs_hz.last().unwrap();
        let total = band_power(&psd, &BandDefinition::new("all", 1e-9, top).unwrap()).unwrap()[0]
            + integrate_linear(&psd.freqs_hz, &psd.power[0], 0.0, 1e-9);
        let alpha = band_power(&psd, &BandDefinition::alpha()).unwrap()[0];
        let theta = band_power(&psd, &BandDefinition::theta()).unwrap()[0];
        assert!(alpha >= 0.9 * total, "alpha {alpha} total {total}");
        assert!(theta <= 0.05 * total, "theta {theta} total {total}");
    }

    #[test]
    fn partial_bins_interpolate() {
        let freqs = vec![0.0, 1.0, 2.0];
        let vals = vec![0.0, 2.0, 2.0];
        assert!((integrate_linear(&freqs, &vals, 0.5, 1.5) - (0.5 * (1.0 + 2.0) * 0.5 + 2.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn band_beyond_spectrum_rejected() {
        let psd = sine_psd(10.0);
        let b = BandDefinition::new("ultra", 100.0, 200.0).unwrap();
        assert!(matches!(band_power(&psd, &b), Err(SignalError::BandOutOfRange { .. })));
        assert!(BandDefinition::new("bad", 8.0, 4.0).is_err());
        assert!(BandDefinition::theta().check_rate(10.0).is_err());
    }

    fn powers(frontal: f64, parietal: f64) -> (Vec<f64>, Vec<f64>) {
        let layout = ChannelLayout::standard16();
        let mut theta = vec![0.0; CHANNEL_COUNT];
        let mut alpha = vec![0.0; CHANNEL_COUNT];
        for &c in &layout.frontal_set {
            theta[c] = frontal;
        }
        for &c in &layout.parietal_set {
            alpha[c] = parietal;
        }
        (theta, alpha)
    }

    #[test]
    fn index_examples() {
        let layout = ChannelLayout::standard16();
        let (t, a) = powers(4.0, 2.0);
        assert_eq!(workload_index(&t, &a, &layout).index, 2.0);
        let (t, a) = powers(3.0, 3.0);
        assert_eq!(workload_index(&t, &a, &layout).index, 1.0);
        let (t9, a9): (Vec<f64>, Vec<f64>) = (t.iter().map(|v| v * 9.0).collect(), a.iter().map(|v| v * 9.0).collect());
        let i1 = workload_index(&t, &a, &layout).index;
        let i9 = workload_index(&t9, &a9, &layout).index;
        assert!(((i9 - i1) / i1).abs() < 1e-9);
    }

    #[test]
    fn degenerate_alpha_flagged() {
        let layout = ChannelLayout::standard16();
        let (t, a) = powers(1.0, 0.0);
        let v = workload_index(&t, &a, &layout);
        assert!(v.degenerate_alpha);
        assert_eq!(v.index, 1.0 / ALPHA_FLOOR);
    }
}
