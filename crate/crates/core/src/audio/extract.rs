use crate::error::{Error, Result};

use super::grid::{BeatGrid, RHYTHMIC_DIM, SPECTRAL_DIM};
use super::tracker::{onset_envelope, spectrogram, track_beats, TrackerConfig};

/// Right-anchored window for the periodicity feature, in frames.
const PERIODICITY_WINDOW: usize = 10;

/// Builds a feature grid directly from audio: tracked beats, per-frame
/// periodicity / onset / RMS / indicator, and per-interval log band energies
/// over 87 log-spaced bands.
pub fn features_from_audio(samples: &[f32], sample_rate: u32, fps: f64) -> Result<BeatGrid> {
    if sample_rate == 0 || !(fps > 0.0) {
        return Err(Error::InvalidArgument("sample rate and fps must be positive".into()));
    }
    let seconds = samples.len() as f64 / sample_rate as f64;
    let frames = (seconds * fps).floor() as usize;
    let cfg = TrackerConfig { fps, ..TrackerConfig::default() };
    let track = track_beats(samples, sample_rate, &cfg);
    let beats: Vec<usize> = track.beat_frames.iter().copied().filter(|&b| b < frames).collect();

    let spec = spectrogram(samples, sample_rate);
    let env = onset_envelope(&spec);
    let env_max = env.iter().cloned().fold(0.0, f64::max);
    let onset_at = |t: usize| -> f64 {
        if env.is_empty() || env_max <= 0.0 {
            return 0.0;
        }
        let sec = t as f64 / fps;
        let i = ((sec * sample_rate as f64 - spec.window as f64 / 2.0) / spec.hop as f64).round();
        let i = (i.max(0.0) as usize).min(env.len() - 1);
        env[i] / env_max
    };
    let onset: Vec<f64> = (0..frames).map(onset_at).collect();
    let period = if track.bpm > 0.0 { (fps * 60.0 / track.bpm).round() as usize } else { 0 };

    let samples_per_frame = sample_rate as f64 / fps;
    let mut rhythmic = Vec::with_capacity(frames);
    for t in 0..frames {
        let periodicity = if period > 0 && t + 1 >= PERIODICITY_WINDOW + period {
            let a = &onset[t + 1 - PERIODICITY_WINDOW..=t];
            let b = &onset[t + 1 - PERIODICITY_WINDOW - period..=t - period];
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na * nb > 0.0 { dot / (na * nb) } else { 0.0 }
        } else {
            0.0
        };
        let lo = (t as f64 * samples_per_frame) as usize;
        let hi = (((t + 1) as f64 * samples_per_frame) as usize).min(samples.len());
        let rms = if hi > lo {
            (samples[lo..hi].iter().map(|s| (*s as f64).powi(2)).sum::<f64>() / (hi - lo) as f64).sqrt()
        } else {
            0.0
        };
        let beat = if beats.binary_search(&t).is_ok() { 1.0 } else { 0.0 };
        let row: [f64; RHYTHMIC_DIM] = [periodicity, onset[t], rms, beat];
        rhythmic.push(row);
    }

    let bins = spec.frames.first().map_or(0, |f| f.len());
    let nyquist = sample_rate as f64 / 2.0;
    let edges: Vec<usize> = (0..=SPECTRAL_DIM)
        .map(|b| {
            let f = 30.0 * (nyquist / 30.0).powf(b as f64 / SPECTRAL_DIM as f64);
            ((f / nyquist) * (bins.saturating_sub(1)) as f64).round() as usize
        })
        .collect();
    let spectral = beats
        .windows(2)
        .map(|w| {
            let t0 = w[0] as f64 / fps;
            let t1 = w[1] as f64 / fps;
            let frames_in: Vec<&Vec<f32>> = spec
                .frames
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let c = spec.time(*i as f64);
                    c >= t0 && c < t1
                })
                .map(|(_, f)| f)
                .collect();
            std::array::from_fn(|b| {
                if frames_in.is_empty() {
                    return 0.0;
                }
                let (lo, hi) = (edges[b], edges[b + 1].max(edges[b] + 1).min(bins));
                let mut acc = 0.0;
                for f in &frames_in {
                    let e: f64 = f[lo.min(bins - 1)..hi.max(lo.min(bins - 1) + 1)].iter().map(|m| (*m as f64).powi(2)).sum();
                    acc += (1.0 + e).ln();
                }
                acc / frames_in.len() as f64
            })
        })
        .collect();
    BeatGrid::new(fps, beats, rhythmic, spectral)
}
