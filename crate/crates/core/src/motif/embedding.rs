use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

use super::word::{timescale_word, MotionWord};

/// Linear map from time-scaled, flattened words to the motif space:
/// `e = normalize(P (x - mean))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBasis {
    pub word_frames: usize,
    pub joint_count: usize,
    pub mean: Vec<f64>,
    /// `dim` rows of length `word_frames * (3 + 4 J)`, orthonormal.
    pub components: Vec<Vec<f64>>,
}

impl EmbeddingBasis {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Unnormalized projection of a flattened word.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x.iter().zip(&self.mean)).map(|(c, (x, m))| c * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &a) in self.components.iter().zip(y) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += a * ci;
            }
        }
        x
    }
}

/// Time-scales a word, removes quaternion sign ambiguity (first frame `w >= 0`,
/// later frames continuous) and flattens it frame by frame.
pub fn flatten_word(word: &MotionWord, word_frames: usize) -> Result<Vec<f64>> {
    let w = timescale_word(word, word_frames)?;
    let j = w.frames[0].rotations.len();
    let mut prev: Vec<Quaternion<f64>> = Vec::with_capacity(j);
    let mut out = Vec::with_capacity(word_frames * (3 + 4 * j));
    for (t, f) in w.frames.iter().enumerate() {
        if f.rotations.len() != j {
            return Err(Error::SkeletonMismatch("joint count changes within word".into()));
        }
        out.extend_from_slice(&f.root_displacement.to_array());
        for (i, q) in f.rotations.iter().enumerate() {
            let q = if t == 0 {
                q.canonical()
            } else if q.dot(prev[i]) < 0.0 {
                -*q
            } else {
                *q
            };
            if t == 0 {
                prev.push(q);
            } else {
                prev[i] = q;
            }
            out.extend_from_slice(&q.to_array());
        }
    }
    Ok(out)
}

/// PCA over flattened words keeping the top `dim` components. Requires at
/// least `dim + 1` words.
pub fn fit_embedding(words: &[MotionWord], dim: usize, word_frames: usize) -> Result<EmbeddingBasis> {
    if words.len() < dim + 1 {
        return Err(Error::TooFew(format!("{} words for a {dim}-dimensional embedding", words.len())));
    }
    fit(words, dim, word_frames)
}

/// As [`fit_embedding`], but shrinks the dimension to what the corpus
/// supports: `min(dim, words - 1, rank)`.
pub fn fit_embedding_reduced(words: &[MotionWord], dim: usize, word_frames: usize) -> Result<EmbeddingBasis> {
    if words.len() < 2 {
        return Err(Error::TooFew(format!("{} words", words.len())));
    }
    fit(words, dim.min(words.len() - 1), word_frames)
}

fn fit(words: &[MotionWord], dim: usize, word_frames: usize) -> Result<EmbeddingBasis> {
    let rows: Vec<Vec<f64>> = words.iter().map(|w| flatten_word(w, word_frames)).collect::<Result<_>>()?;
    let n = rows.len();
    let big_d = rows[0].len();
    if rows.iter().any(|r| r.len() != big_d) {
        return Err(Error::SkeletonMismatch("words with different joint counts".into()));
    }
    let joint_count = (big_d / word_frames - 3) / 4;
    let mut mean = vec![0.0; big_d];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, big_d, |i, j| rows[i][j] - mean[j]);

    // eigenvectors of the smaller Gram/covariance matrix
    let (values, vectors) = if n <= big_d {
        let g = &x * x.transpose();
        let e = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]).then(a.cmp(&b)));
        let mut vals = Vec::new();
        let mut vecs = Vec::new();
        for &i in &order {
            let lambda = e.eigenvalues[i];
            if lambda <= 0.0 {
                continue;
            }
            let v = x.transpose() * e.eigenvectors.column(i) / lambda.sqrt();
            vals.push(lambda);
            vecs.push(v.iter().copied().collect::<Vec<f64>>());
        }
        (vals, vecs)
    } else {
        let c = x.transpose() * &x;
        let e = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..big_d).collect();
        order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]).then(a.cmp(&b)));
        let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = order.iter().map(|&i| e.eigenvectors.column(i).iter().copied().collect()).collect();
        (vals, vecs)
    };
    let top = values.first().copied().unwrap_or(0.0);
    let tol = top * 1e-12 * big_d as f64;
    let mut components = Vec::with_capacity(dim);
    for (lambda, mut v) in values.into_iter().zip(vectors) {
        if components.len() == dim || lambda <= tol {
            break;
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        // sign: largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        let s = if pivot < 0.0 { -1.0 / norm } else { 1.0 / norm };
        v.iter_mut().for_each(|a| *a *= s);
        components.push(v);
    }
    if components.is_empty() {
        return Err(Error::TooFew("corpus words have no variance".into()));
    }
    Ok(EmbeddingBasis { word_frames, joint_count, mean, components })
}

/// Unit-norm motif-space vector of a word.
pub fn embed_word(word: &MotionWord, basis: &EmbeddingBasis) -> Result<Vec<f64>> {
    let x = flatten_word(word, basis.word_frames)?;
    if x.len() != basis.input_dim() {
        return Err(Error::SkeletonMismatch(format!(
            "word flattens to {} values, basis expects {}",
            x.len(),
            basis.input_dim()
        )));
    }
    let y = basis.project(&x);
    let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return Err(Error::DegenerateWord("projection is zero".into()));
    }
    Ok(y.into_iter().map(|a| a / norm).collect())
}
