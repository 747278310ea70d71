use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motif::MotionWord;
use crate::rng;

/// Per-channel scale `d1` and shift `d2` over the `4 J` quaternion components
/// (joint-major, `w x y z`), with gain `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub beta: f64,
}

impl StyleParams {
    pub fn neutral(joints: usize, beta: f64) -> Self {
        Self { d1: vec![0.0; 4 * joints], d2: vec![0.0; 4 * joints], beta }
    }

    /// Splits a `8 J` vector into `d1`, `d2`.
    pub fn from_vector(v: &[f64], beta: f64) -> Result<Self> {
        if v.len() % 8 != 0 {
            return Err(Error::InvalidArgument(format!("style vector of length {}", v.len())));
        }
        let half = v.len() / 2;
        Ok(Self { d1: v[..half].to_vec(), d2: v[half..].to_vec(), beta })
    }

    pub fn validate(&self, joints: usize) -> Result<()> {
        if self.d1.len() != 4 * joints || self.d2.len() != 4 * joints {
            return Err(Error::InvalidArgument(format!(
                "style params of length {}/{} for {joints} joints",
                self.d1.len(),
                self.d2.len()
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) || self.d1.iter().chain(&self.d2).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("style params must be finite with beta >= 0".into()));
        }
        Ok(())
    }
}

/// Raised-cosine weight of frame `t` in an `n`-frame word: 0 at both ends,
/// 1 in the middle.
pub fn style_window(t: usize, n: usize) -> f64 {
    if t == 0 || t + 1 >= n {
        return 0.0;
    }
    0.5 - 0.5 * (2.0 * std::f64::consts::PI * t as f64 / (n - 1) as f64).cos()
}

/// `x' = (1 + b g d1) x + b g d2` on every quaternion component, followed by
/// renormalization. Frames with zero effective gain are left untouched, so the
/// endpoints and the `beta = 0` case are bit-identical to the input.
pub fn apply_style(word: &MotionWord, params: &StyleParams) -> Result<MotionWord> {
    let n = word.len();
    if n < 3 {
        return Err(Error::TooFew(format!("style needs 3 frames, word has {n}")));
    }
    let joints = word.frames[0].rotations.len();
    params.validate(joints)?;
    let mut out = word.clone();
    for (t, frame) in out.frames.iter_mut().enumerate() {
        let g = params.beta * style_window(t, n);
        if g == 0.0 {
            continue;
        }
        for (j, q) in frame.rotations.iter_mut().enumerate() {
            let mut c = q.to_array();
            for (i, v) in c.iter_mut().enumerate() {
                let ch = 4 * j + i;
                *v = (1.0 + g * params.d1[ch]) * *v + g * params.d2[ch];
            }
            *q = crate::quat::Quaternion::from_slice(&c).normalized().map_err(|_| {
                Error::DegenerateWord(format!("style collapses joint {j} at frame {t}"))
            })?;
        }
    }
    Ok(out)
}

/// Fixed, seeded two-layer perceptron from spectral features to raw style
/// vectors: `W2 tanh(W1 a + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleMapper {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl StyleMapper {
    pub fn seeded(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut layer = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
            let s = (6.0 / (rows + cols) as f64).sqrt();
            (0..rows).map(|_| (0..cols).map(|_| r.random_range(-s..s)).collect()).collect()
        };
        let w1 = layer(hidden, input);
        let w2 = layer(output, hidden);
        let mut r2 = rng::derived(seed, 1);
        let b1 = (0..hidden).map(|_| r2.random_range(-0.1..0.1)).collect();
        let b2 = (0..output).map(|_| r2.random_range(-0.1..0.1)).collect();
        Self { w1, b1, w2, b2 }
    }

    pub fn for_joints(joints: usize, seed: u64) -> Self {
        Self::seeded(crate::audio::SPECTRAL_DIM, 64, 8 * joints, seed)
    }

    pub fn forward(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.w1.first().map_or(0, Vec::len) {
            return Err(Error::InvalidArgument(format!("mapper input of length {}", a.len())));
        }
        let h: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
            .collect();
        Ok(self.w2.iter().zip(&self.b2).map(|(row, b)| row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + b).collect())
    }
}

/// Mapper output standardized across the vector (zero mean, unit variance)
/// and split into `d1`, `d2`.
pub fn style_params_from_spectral(a_s: &[f64], mapper: &StyleMapper, beta: f64) -> Result<StyleParams> {
    let v = mapper.forward(a_s)?;
    StyleParams::from_vector(&standardize(&v), beta)
}

pub fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return vec![0.0; v.len()];
    }
    let sd = var.sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}
