use pizza_mwl::signal::{
    concat_chunks, detect_artifact, segment_epochs, welch_psd, EegChunk, Epoch, PipelineConfig, Taper,
    WelchConfig, WorkloadPipeline, DEFAULT_ARTIFACT_THRESHOLD_UV,
};
use pizza_mwl::synth::{generate, inject_artifacts, GeneratorParams, SpikeTrain, WorkloadScript};

fn noise_only(seed: u64, exponent: f64) -> GeneratorParams {
    // amplitudes must stay positive; make the carriers negligible instead
    GeneratorParams {
        seed,
        pink_exponent: exponent,
        theta_amp_range: [1e-9, 1e-9],
        alpha_amp_range: [1e-9, 1e-9],
        ..GeneratorParams::default()
    }
}

fn record(script: WorkloadScript, params: GeneratorParams) -> EegChunk {
    let chunks: Vec<_> = generate(script, params).unwrap().collect();
    concat_chunks(&chunks).unwrap()
}

/// Least-squares slope of log10 PSD against log10 f over 1–40 Hz, averaged over channels.
fn log_log_slope(x: &EegChunk) -> f64 {
    let epoch = Epoch {
        end_time_s: x.end_time_s(),
        window_s: x.duration_s(),
        sampling_rate_hz: x.sampling_rate_hz,
        samples: x.samples.clone(),
    };
    let cfg = WelchConfig { segment_len: 1000, overlap_fraction: 0.5, taper: Taper::Hann };
    let psd = welch_psd(&epoch, cfg).unwrap();
    let mut slopes = Vec::new();
    for row in &psd.power {
        let pts: Vec<(f64, f64)> = psd
            .freqs_hz
            .iter()
            .zip(row)
            .filter(|(f, _)| (1.0..=40.0).contains(*f))
            .map(|(f, p)| (f.log10(), p.log10()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        slopes.push(sxy / sxx);
    }
    slopes.iter().sum::<f64>() / slopes.len() as f64
}

#[test]
fn pink_noise_slope_tracks_exponent() {
    for beta in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let x = record(WorkloadScript::constant(0.0, 120.0).unwrap(), noise_only(5, beta));
        let slope = log_log_slope(&x);
        println!("beta {beta}: slope {slope:.3}");
        assert!((slope + beta).abs() <= 0.3, "beta {beta} slope {slope}");
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn distinct_seeds_give_uncorrelated_noise() {
    let s = WorkloadScript::constant(0.0, 10.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let a = record(s.clone(), noise_only(seed, 1.0));
        let b = record(s.clone(), noise_only(seed + 100, 1.0));
        for ch in 0..a.samples.len() {
            let r = correlation(&a.samples[ch], &b.samples[ch]);
            worst = worst.max(r.abs());
        }
    }
    println!("worst |r| {worst}");
    assert!(worst < 0.2);
}

/// Counts must follow Poisson(18). The [8, 30] band holds 99.4 % of that
/// mass, so a correct generator may put the odd seed outside it.
#[test]
fn poisson_spike_count_over_seed_sweep() {
    let counts: Vec<usize> = (0..100u64)
        .map(|seed| SpikeTrain::from_seed(6.0, 500.0, seed).onsets(180.0).len())
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let outside = counts.iter().filter(|c| !(8..=30).contains(*c)).count();
    println!("mean {mean} var {var} outside [8,30]: {outside}");
    // sd of the mean is 0.42; 0.62 seeds expected outside, P(>3) = 0.3 %
    assert!((mean - 18.0).abs() < 1.5, "mean {mean}");
    assert!((0.6..1.5).contains(&(var / mean)), "dispersion {}", var / mean);
    assert!(outside <= 3, "{outside} seeds outside [8, 30]: {counts:?}");
}

#[test]
fn injected_spikes_flag_their_epochs() {
    let s = WorkloadScript::constant(0.0, 60.0).unwrap();
    let base: Vec<_> = generate(s, GeneratorParams::default()).unwrap().collect();
    let onsets = SpikeTrain::from_seed(6.0, 500.0, 3).onsets(60.0);
    assert!(!onsets.is_empty());
    let dirty: Vec<_> = inject_artifacts(base.into_iter(), 6.0, 500.0, 3).collect();
    let epochs = segment_epochs(dirty.iter(), 2.0, 0.5).unwrap();
    for e in &epochs {
        let start = e.end_time_s - e.window_s;
        let contains_peak = onsets.iter().any(|t0| {
            let peak = t0 + 0.05;
            peak >= start && peak < e.end_time_s
        });
        if contains_peak {
            assert!(detect_artifact(e, DEFAULT_ARTIFACT_THRESHOLD_UV), "epoch ending {}", e.end_time_s);
        }
    }
    // and through the filtered pipeline
    let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
    let samples: Vec<_> = dirty.iter().flat_map(|c| p.push(c).unwrap()).collect();
    for s in &samples {
        let start = s.end_time_s - 2.0;
        if onsets.iter().any(|t0| t0 + 0.05 >= start + 0.1 && t0 + 0.05 < s.end_time_s - 0.1) {
            assert!(s.artifact, "sample at {}", s.end_time_s);
        }
    }
}

#[test]
fn marker_monotonicity() {
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut means = Vec::new();
    for &level in &levels {
        let mut p = WorkloadPipeline::new(PipelineConfig::default()).unwrap();
        let samples: Vec<_> = generate(WorkloadScript::constant(level, 40.0).unwrap(), GeneratorParams::default())
            .unwrap()
            .flat_map(|c| p.push(&c).unwrap())
            .collect();
        let steady: Vec<f64> = samples.iter().filter(|s| s.end_time_s > 5.0).map(|s| s.index).collect();
        means.push(steady.iter().sum::<f64>() / steady.len() as f64);
    }
    println!("mean index by level: {means:?}");
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}
