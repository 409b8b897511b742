//! 1/f^β noise from a cascade of first-order shelving sections.
//!
//! Pole frequencies are spaced three per decade; each section's zero sits a
//! fraction β/2 of the way (in log frequency) to the next pole, so the
//! cascade's log-log slope averages −β between the lowest pole and Nyquist.
//! Below the lowest pole (1 Hz, the bottom of the analysed band) the spectrum
//! is flat, which keeps independent streams decorrelated over short spans.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const LOWEST_POLE_HZ: f64 = 1.0;
const POLES_PER_DECADE: f64 = 3.0;
const TOP_POLE_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy)]
struct Section {
    pole: f64,
    zero: f64,
    x_prev: f64,
    y_prev: f64,
}

impl Section {
    fn step(&mut self, x: f64) -> f64 {
        let y = self.pole * self.y_prev + x - self.zero * self.x_prev;
        self.x_prev = x;
        self.y_prev = y;
        y
    }
}

#[derive(Debug, Clone)]
pub struct PinkNoise {
    sections: Vec<Section>,
    gain: f64,
    rng: ChaCha8Rng,
}

impl PinkNoise {
    /// Stationary noise with standard deviation `sigma`. `exponent` is β in
    /// PSD ∝ 1/f^β, 0 ≤ β ≤ 2.
    pub fn new(sigma: f64, exponent: f64, sampling_rate_hz: f64, rng: ChaCha8Rng) -> Self {
        let ratio = 10f64.powf(1.0 / POLES_PER_DECADE);
        let top = TOP_POLE_FRACTION * sampling_rate_hz;
        let mut sections = Vec::new();
        let mut f = LOWEST_POLE_HZ;
        while f < top {
            let fz = f * ratio.powf(exponent / 2.0);
            sections.push(Section {
                pole: (-2.0 * std::f64::consts::PI * f / sampling_rate_hz).exp(),
                zero: (-2.0 * std::f64::consts::PI * fz / sampling_rate_hz).exp(),
                x_prev: 0.0,
                y_prev: 0.0,
            });
            f *= ratio;
        }
        let mut noise = Self {
            gain: 1.0,
            sections,
            rng,
        };
        let energy = noise.impulse_energy(sampling_rate_hz);
        noise.gain = if energy > 0.0 { sigma / energy.sqrt() } else { 0.0 };
        // start from the stationary regime
        let warmup = (5.0 / (2.0 * std::f64::consts::PI * LOWEST_POLE_HZ) * sampling_rate_hz) as usize;
        for _ in 0..warmup {
            noise.next_sample();
        }
        noise
    }

    pub fn from_seed(sigma: f64, exponent: f64, sampling_rate_hz: f64, seed: u64) -> Self {
        Self::new(sigma, exponent, sampling_rate_hz, ChaCha8Rng::seed_from_u64(seed))
    }

    fn impulse_energy(&self, sampling_rate_hz: f64) -> f64 {
        let mut probe: Vec<Section> = self.sections.clone();
        // slowest section decays as pole^n; run well past its time constant
        let n = (12.0 / (2.0 * std::f64::consts::PI * LOWEST_POLE_HZ) * sampling_rate_hz) as usize;
        let mut energy = 0.0;
        for i in 0..n.max(1) {
            let mut v = if i == 0 { 1.0 } else { 0.0 };
            for s in probe.iter_mut() {
                v = s.step(v);
            }
            energy += v * v;
        }
        energy
    }

    pub fn next_sample(&mut self) -> f64 {
        let mut v: f64 = StandardNormal.sample(&mut self.rng);
        for s in self.sections.iter_mut() {
            v = s.step(v);
        }
        v * self.gain
    }
}
