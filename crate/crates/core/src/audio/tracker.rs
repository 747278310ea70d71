use rustfft::{num_complex::Complex, FftPlanner};

/// Output frame rate of tracked beats.
const MOTION_FPS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub min_bpm: f64,
    pub max_bpm: f64,
    pub fps: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            min_bpm: 60.0,
            max_bpm: 240.0,
            fps: MOTION_FPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatTrack {
    pub bpm: f64,
    /// Beat positions in motion frames.
    pub beat_frames: Vec<usize>,
    /// Beat times in seconds.
    pub beat_times: Vec<f64>,
}

pub(crate) struct Spectrogram {
    pub hop: usize,
    pub window: usize,
    pub sample_rate: f64,
    /// Magnitude spectra, one per hop.
    pub frames: Vec<Vec<f32>>,
}

impl Spectrogram {
    pub fn rate(&self) -> f64 {
        self.sample_rate / self.hop as f64
    }

    /// Time (s) of the centre of analysis frame `i`.
    pub fn time(&self, i: f64) -> f64 {
        (i * self.hop as f64 + self.window as f64 / 2.0) / self.sample_rate
    }
}

pub(crate) fn spectrogram(samples: &[f32], sample_rate: u32) -> Spectrogram {
    let window = if sample_rate <= 24_000 { 1024 } else { 2048 };
    let hop = window / 4;
    let hann: Vec<f32> = (0..window)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f32::consts::PI * i as f32 / window as f32).cos())
        .collect();
    let fft = FftPlanner::<f32>::new().plan_fft_forward(window);
    let mut frames = Vec::new();
    let mut buf = vec![Complex::new(0.0f32, 0.0); window];
    let mut start = 0;
    while start + window <= samples.len() {
        for (b, (s, w)) in buf.iter_mut().zip(samples[start..start + window].iter().zip(&hann)) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..window / 2 + 1].iter().map(|c| c.norm()).collect());
        start += hop;
    }
    Spectrogram {
        hop,
        window,
        sample_rate: sample_rate as f64,
        frames,
    }
}

/// Half-wave rectified spectral flux per analysis frame.
pub(crate) fn onset_envelope(spec: &Spectrogram) -> Vec<f64> {
    let mut env = vec![0.0; spec.frames.len()];
    for t in 1..spec.frames.len() {
        env[t] = spec.frames[t]
            .iter()
            .zip(&spec.frames[t - 1])
            .map(|(a, b)| (a - b).max(0.0) as f64)
            .sum();
    }
    env
}

/// Best lag (fractional, in envelope frames) of the autocorrelation within
/// the tempo band, weighted by a log-normal prior around 120 bpm (one octave
/// wide) to settle octave ambiguity.
fn tempo_lag(env: &[f64], rate: f64, cfg: &TrackerConfig) -> Option<f64> {
    let mean = env.iter().sum::<f64>() / env.len() as f64;
    let x: Vec<f64> = env.iter().map(|v| v - mean).collect();
    let min_lag = (60.0 * rate / cfg.max_bpm).floor().max(1.0) as usize;
    let max_lag = ((60.0 * rate / cfg.min_bpm).ceil() as usize).min(x.len().saturating_sub(2));
    if min_lag + 1 >= max_lag {
        return None;
    }
    let ac = |lag: usize| -> f64 {
        let bpm = 60.0 * rate / lag.max(1) as f64;
        let prior = (-0.5 * (bpm / 120.0).log2().powi(2)).exp();
        prior * x[lag..].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
    };
    let values: Vec<f64> = (min_lag - 1..=max_lag + 1).map(ac).collect();
    let mut best = None;
    let mut best_v = 0.0;
    for i in 1..values.len() - 1 {
        let lag = min_lag - 1 + i;
        if lag < min_lag || lag > max_lag {
            continue;
        }
        if values[i] > best_v {
            best_v = values[i];
            best = Some(i);
        }
    }
    let i = best?;
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Some((min_lag - 1 + i) as f64 + delta)
}

/// Onset-based beat tracking: spectral flux envelope, tempo from the
/// autocorrelation peak in the configured bpm band, then beats on the best
/// phase of that period, each snapped to the strongest onset nearby.
/// Silent or too-short input yields no beats.
pub fn track_beats(samples: &[f32], sample_rate: u32, cfg: &TrackerConfig) -> BeatTrack {
    let empty = BeatTrack {
        bpm: 0.0,
        beat_frames: Vec::new(),
        beat_times: Vec::new(),
    };
    if sample_rate == 0 || samples.iter().all(|s| s.abs() < 1e-9) {
        return empty;
    }
    let spec = spectrogram(samples, sample_rate);
    let env = onset_envelope(&spec);
    if env.len() < 4 || env.iter().all(|v| *v <= 0.0) {
        return empty;
    }
    let rate = spec.rate();
    let Some(lag) = tempo_lag(&env, rate, cfg) else {
        return empty;
    };

    // phase with the largest summed envelope along the beat comb
    let n = env.len();
    let comb = |phase: f64| -> f64 {
        let mut s = 0.0;
        let mut t = phase;
        while (t.round() as usize) < n {
            s += env[t.round() as usize];
            t += lag;
        }
        s
    };
    let steps = lag.ceil() as usize;
    let phase = (0..steps)
        .map(|p| p as f64)
        .max_by(|a, b| comb(*a).total_cmp(&comb(*b)))
        .unwrap_or(0.0);

    let radius = (lag / 10.0).round().max(1.0) as isize;
    let mut times = Vec::new();
    let mut t = phase;
    while (t.round() as usize) < n {
        let c = t.round() as isize;
        let lo = (c - radius).max(0) as usize;
        let hi = ((c + radius) as usize).min(n - 1);
        let peak = (lo..=hi).max_by(|a, b| env[*a].total_cmp(&env[*b]).then(b.cmp(a))).unwrap_or(c as usize);
        times.push(spec.time(peak as f64));
        t += lag;
    }
    let mut beat_frames: Vec<usize> = times.iter().map(|s| (s * cfg.fps).round() as usize).collect();
    beat_frames.dedup();
    BeatTrack {
        bpm: 60.0 * rate / lag,
        beat_frames,
        beat_times: times,
    }
}
