//! Butterworth band-pass design and second-order-section filtering.
//!
//! Design goes analog prototype -> band-pass transform -> bilinear
//! transform (with pre-warped edges), then pairs the digital poles into
//! biquads. Each biquad carries one zero at z = 1 and one at z = -1.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::chunk::EegChunk;
use super::SignalError;

/// Direct-form biquad, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    fn poles(&self) -> [Complex64; 2] {
        // roots of z^2 + a1 z + a2
        let a1 = Complex64::new(self.a[1], 0.0);
        let disc = (a1 * a1 - 4.0 * self.a[2]).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub sampling_rate_hz: f64,
    pub order: usize,
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// Designs an `order`-pole Butterworth band-pass (`order` even, >= 2).
pub fn design_bandpass(
    f_low_hz: f64,
    f_high_hz: f64,
    sampling_rate_hz: f64,
    order: usize,
) -> Result<FilterCoefficients, SignalError> {
    let nyquist = sampling_rate_hz / 2.0;
    if !(f_low_hz > 0.0 && f_low_hz < f_high_hz && f_high_hz < nyquist) {
        return Err(SignalError::InvalidBand {
            f_low_hz,
            f_high_hz,
            nyquist_hz: nyquist,
        });
    }
    if order < 2 || order % 2 != 0 {
        return Err(SignalError::InvalidOrder(order));
    }

    let proto_order = order / 2;
    let fs2 = 2.0 * sampling_rate_hz;
    let w_low = fs2 * (PI * f_low_hz / sampling_rate_hz).tan();
    let w_high = fs2 * (PI * f_high_hz / sampling_rate_hz).tan();
    let bw = w_high - w_low;
    let w0_sq = w_low * w_high;

    let mut digital = Vec::with_capacity(order);
    for k in 0..proto_order {
        let theta = PI * (2 * k + proto_order + 1) as f64 / (2 * proto_order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        for s in [half + root, half - root] {
            digital.push((fs2 + s) / (fs2 - s));
        }
    }

    let sections = pair_poles(digital)
        .into_iter()
        .map(|(p1, p2)| {
            let sum = p1 + p2;
            let prod = p1 * p2;
            Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -sum.re, prod.re],
            }
        })
        .collect();

    let mut coeffs = FilterCoefficients {
        f_low_hz,
        f_high_hz,
        sampling_rate_hz,
        order,
        sections,
    };

    // unit gain at the geometric centre of the pre-warped band
    let w_center = 2.0 * (w0_sq.sqrt() / fs2).atan();
    let f_center = w_center * sampling_rate_hz / (2.0 * PI);
    let gain = coeffs.response(f_center).norm();
    if !(gain.is_finite() && gain > 0.0) {
        return Err(SignalError::UnstableDesign(format!("degenerate gain {gain}")));
    }
    for b in coeffs.sections[0].b.iter_mut() {
        *b /= gain;
    }

    if let Some(p) = coeffs.poles().into_iter().find(|p| !(p.norm() < 1.0)) {
        return Err(SignalError::UnstableDesign(format!(
            "pole {p} on or outside the unit circle"
        )));
    }
    Ok(coeffs)
}

/// Groups poles into conjugate pairs, then pairs leftover real poles.
fn pair_poles(mut poles: Vec<Complex64>) -> Vec<(Complex64, Complex64)> {
    const IMAG_TOL: f64 = 1e-10;
    poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for p in &poles {
        if p.im > IMAG_TOL {
            pairs.push((*p, p.conj()));
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(Complex64::new(p.re, 0.0));
        }
    }
    for pair in reals.chunks(2) {
        match pair {
            [a, b] => pairs.push((*a, *b)),
            [a] => pairs.push((*a, Complex64::new(0.0, 0.0))),
            _ => unreachable!(),
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Streaming, no look-ahead; state persists across chunks.
    Causal,
    /// Forward-backward; offline only.
    ZeroPhase,
}

/// Transposed direct-form II runner for one channel.
#[derive(Debug, Clone)]
struct SosState {
    z: Vec<[f64; 2]>,
}

impl SosState {
    fn new(sections: usize) -> Self {
        Self {
            z: vec![[0.0; 2]; sections],
        }
    }

    #[inline]
    fn step(&mut self, sections: &[Biquad], mut x: f64) -> f64 {
        for (s, z) in sections.iter().zip(self.z.iter_mut()) {
            let y = s.b[0] * x + z[0];
            z[0] = s.b[1] * x - s.a[1] * y + z[1];
            z[1] = s.b[2] * x - s.a[2] * y;
            x = y;
        }
        x
    }
}

/// Per-channel causal filter whose state carries over between chunks of one stream.
#[derive(Debug, Clone)]
pub struct CausalFilterBank {
    coeffs: FilterCoefficients,
    channels: Vec<SosState>,
}

impl CausalFilterBank {
    pub fn new(coeffs: FilterCoefficients, channels: usize) -> Self {
        let n = coeffs.sections.len();
        Self {
            coeffs,
            channels: (0..channels).map(|_| SosState::new(n)).collect(),
        }
    }

    pub fn coefficients(&self) -> &FilterCoefficients {
        &self.coeffs
    }

    pub fn process(&mut self, chunk: &EegChunk) -> Result<EegChunk, SignalError> {
        if chunk.samples.len() != self.channels.len() {
            return Err(SignalError::ShapeMismatch(format!(
                "filter bank has {} channels, chunk has {}",
                self.channels.len(),
                chunk.samples.len()
            )));
        }
        check_rate(&self.coeffs, chunk)?;
        let samples = chunk
            .samples
            .iter()
            .zip(self.channels.iter_mut())
            .map(|(row, state)| row.iter().map(|&x| state.step(&self.coeffs.sections, x)).collect())
            .collect();
        Ok(EegChunk {
            start_time_s: chunk.start_time_s,
            sampling_rate_hz: chunk.sampling_rate_hz,
            samples,
        })
    }
}

fn check_rate(coeffs: &FilterCoefficients, chunk: &EegChunk) -> Result<(), SignalError> {
    if (coeffs.sampling_rate_hz - chunk.sampling_rate_hz).abs() > 1e-9 {
        return Err(SignalError::ShapeMismatch(format!(
            "filter designed for {} Hz, chunk is {} Hz",
            coeffs.sampling_rate_hz, chunk.sampling_rate_hz
        )));
    }
    Ok(())
}

/// Forward-backward filtering of one channel with odd-symmetric edge padding.
pub fn filtfilt(coeffs: &FilterCoefficients, signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    // a few periods of the lowest passband frequency absorb the start-up transient
    let settle = (3.0 * coeffs.sampling_rate_hz / coeffs.f_low_hz).ceil() as usize;
    let pad = settle.max(3 * (2 * coeffs.sections.len() + 1)).min(n - 1);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (signal[0], signal[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let run = |data: &mut Vec<f64>| {
        let mut state = SosState::new(coeffs.sections.len());
        for v in data.iter_mut() {
            *v = state.step(&coeffs.sections, *v);
        }
    };
    run(&mut ext);
    ext.reverse();
    run(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Applies the filter to a chunk. Causal mode needs a persistent bank; see
/// [`CausalFilterBank`]. This entry point handles a single standalone chunk.
pub fn apply_filter(
    chunk: &EegChunk,
    coeffs: &FilterCoefficients,
    mode: FilterMode,
) -> Result<EegChunk, SignalError> {
    check_rate(coeffs, chunk)?;
    match mode {
        FilterMode::Causal => CausalFilterBank::new(coeffs.clone(), chunk.samples.len()).process(chunk),
        FilterMode::ZeroPhase => Ok(EegChunk {
            start_time_s: chunk.start_time_s,
            sampling_rate_hz: chunk.sampling_rate_hz,
            samples: chunk.samples.iter().map(|row| filtfilt(coeffs, row)).collect(),
        }),
    }
}
