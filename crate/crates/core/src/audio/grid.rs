use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Per-frame rhythmic features: tempogram autocorrelation, onset strength,
/// RMS, beat indicator.
pub const RHYTHMIC_DIM: usize = 4;
/// Per-beat-interval spectral features (opaque to the engine).
pub const SPECTRAL_DIM: usize = 87;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeatGridFile {
    fps: f64,
    beat_frames: Vec<i64>,
    rhythmic: Vec<Vec<f64>>,
    spectral: Vec<Vec<f64>>,
}

/// Beat positions plus the features aligned to them.
///
/// Invariants: beats strictly increasing and inside the frame range; one
/// rhythmic row per frame whose 4th entry is 1 exactly on beats; one spectral
/// row per beat interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeatGridFile", into = "BeatGridFile")]
pub struct BeatGrid {
    pub fps: f64,
    pub beat_frames: Vec<usize>,
    pub rhythmic: Vec<[f64; RHYTHMIC_DIM]>,
    pub spectral: Vec<[f64; SPECTRAL_DIM]>,
}

impl TryFrom<BeatGridFile> for BeatGrid {
    type Error = Error;

    fn try_from(f: BeatGridFile) -> Result<Self> {
        if !(f.fps > 0.0) {
            return Err(Error::Schema(format!("fps must be positive, got {}", f.fps)));
        }
        let mut beats = Vec::with_capacity(f.beat_frames.len());
        for &b in &f.beat_frames {
            if b < 0 {
                return Err(Error::Schema(format!("negative beat frame {b}")));
            }
            beats.push(b as usize);
        }
        let mut rhythmic = Vec::with_capacity(f.rhythmic.len());
        for (t, row) in f.rhythmic.iter().enumerate() {
            let arr: [f64; RHYTHMIC_DIM] = row.as_slice().try_into().map_err(|_| {
                Error::Schema(format!("rhythmic row {t} has {} values, expected {RHYTHMIC_DIM}", row.len()))
            })?;
            rhythmic.push(arr);
        }
        let mut spectral = Vec::with_capacity(f.spectral.len());
        for (k, row) in f.spectral.iter().enumerate() {
            let arr: [f64; SPECTRAL_DIM] = row.as_slice().try_into().map_err(|_| {
                Error::Schema(format!("spectral row {k} has {} values, expected {SPECTRAL_DIM}", row.len()))
            })?;
            spectral.push(arr);
        }
        BeatGrid::new(f.fps, beats, rhythmic, spectral)
    }
}

impl From<BeatGrid> for BeatGridFile {
    fn from(g: BeatGrid) -> Self {
        Self {
            fps: g.fps,
            beat_frames: g.beat_frames.iter().map(|&b| b as i64).collect(),
            rhythmic: g.rhythmic.iter().map(|r| r.to_vec()).collect(),
            spectral: g.spectral.iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl BeatGrid {
    pub fn new(
        fps: f64,
        beat_frames: Vec<usize>,
        rhythmic: Vec<[f64; RHYTHMIC_DIM]>,
        spectral: Vec<[f64; SPECTRAL_DIM]>,
    ) -> Result<Self> {
        let g = Self { fps, beat_frames, rhythmic, spectral };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beat_frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Schema("beat frames must be strictly increasing".into()));
        }
        let n = self.rhythmic.len();
        if let Some(&last) = self.beat_frames.last() {
            if last >= n {
                return Err(Error::Schema(format!("beat frame {last} outside {n} frames")));
            }
        }
        let mut is_beat = vec![false; n];
        for &b in &self.beat_frames {
            is_beat[b] = true;
        }
        for (t, row) in self.rhythmic.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("non-finite rhythmic value at frame {t}")));
            }
            let want = if is_beat[t] { 1.0 } else { 0.0 };
            if row[3] != want {
                return Err(Error::Schema(format!(
                    "beat indicator at frame {t} is {} but beat list says {want}",
                    row[3]
                )));
            }
        }
        let intervals = self.beat_frames.len().saturating_sub(1);
        if self.spectral.len() != intervals {
            return Err(Error::Schema(format!(
                "{} spectral rows for {intervals} beat intervals",
                self.spectral.len()
            )));
        }
        if self.spectral.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite spectral value".into()));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.rhythmic.len()
    }

    pub fn interval_count(&self) -> usize {
        self.beat_frames.len().saturating_sub(1)
    }

    /// Frame gaps between consecutive beats.
    pub fn gaps(&self) -> Vec<usize> {
        self.beat_frames.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BeatGridFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("beat grid serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Builds rhythmic rows from a beat list using smooth surrogates: a
    /// cosine at the beat period, a Gaussian onset bump per beat, constant RMS
    /// and the exact indicator.
    pub fn surrogate_rhythmic(beats: &[usize], frames: usize) -> Vec<[f64; RHYTHMIC_DIM]> {
        let period = if beats.len() >= 2 {
            (beats[beats.len() - 1] - beats[0]) as f64 / (beats.len() - 1) as f64
        } else {
            frames.max(1) as f64
        };
        let origin = beats.first().copied().unwrap_or(0) as f64;
        let mut rows = Vec::with_capacity(frames);
        for t in 0..frames {
            let i = beats.partition_point(|&b| b < t);
            let nearest = [i.checked_sub(1), Some(i)]
                .into_iter()
                .flatten()
                .filter_map(|k| beats.get(k))
                .map(|&b| (b as f64 - t as f64).abs())
                .fold(f64::INFINITY, f64::min);
            let a1 = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * (t as f64 - origin) / period).cos());
            let a2 = (-nearest * nearest / (2.0 * 1.5 * 1.5)).exp();
            let a4 = if beats.binary_search(&t).is_ok() { 1.0 } else { 0.0 };
            rows.push([a1, a2, 0.5, a4]);
        }
        rows
    }
}

/// Regular beat grid at `bpm`: beats at `round(k * fps * 60 / bpm)`, smooth
/// rhythmic surrogates and seeded pseudo-random spectral rows.
pub fn synth_beat_grid(bpm: f64, fps: f64, duration_frames: usize, seed: u64) -> Result<BeatGrid> {
    if !(bpm > 0.0) || !bpm.is_finite() {
        return Err(Error::InvalidArgument(format!("bpm must be positive, got {bpm}")));
    }
    if !(fps > 0.0) {
        return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
    }
    let period = fps * 60.0 / bpm;
    let mut beats = Vec::new();
    for k in 0.. {
        let b = (k as f64 * period).round() as usize;
        if b >= duration_frames {
            break;
        }
        if beats.last() != Some(&b) {
            beats.push(b);
        }
    }
    let rhythmic = BeatGrid::surrogate_rhythmic(&beats, duration_frames);
    let mut r = rng::seeded(seed);
    let spectral = (0..beats.len().saturating_sub(1))
        .map(|_| std::array::from_fn(|_| r.random::<f64>()))
        .collect();
    BeatGrid::new(fps, beats, rhythmic, spectral)
}
