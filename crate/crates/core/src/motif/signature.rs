use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Normalized motif histogram. All zeros before any motif is counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(pub Vec<f64>);

impl Signature {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Self::zeros(counts.len());
        }
        Self(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("signature weights must be finite and non-negative".into()));
        }
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return Ok(Self::zeros(w.len()));
        }
        Ok(Self(w.iter().map(|v| v / total).collect()))
    }

    /// Element-wise mean of signatures, e.g. a genre template.
    pub fn average(items: &[Signature]) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::TooFew("no signatures to average".into()));
        };
        let k = first.k();
        if items.iter().any(|s| s.k() != k) {
            return Err(Error::InvalidArgument("signatures of different K".into()));
        }
        let mut out = vec![0.0; k];
        for s in items {
            out.iter_mut().zip(&s.0).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= items.len() as f64);
        Ok(Self(out))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Occurrence histogram of a motif stream over `k` motifs.
pub fn compute_signature(stream: &[usize], k: usize) -> Result<Signature> {
    let mut counts = vec![0u64; k];
    for &m in stream {
        if m >= k {
            return Err(Error::MotifOutOfRange { id: m, k });
        }
        counts[m] += 1;
    }
    Ok(Signature::from_counts(&counts))
}

/// `1/2 sum (a_k - b_k)^2 / (a_k + b_k)`, with `0/0` terms taken as 0.
pub fn chi_square<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("signatures of length {} and {}", a.len(), b.len())));
    }
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("signature"));
        }
        if x < T::zero() || y < T::zero() {
            return Err(Error::InvalidArgument("negative signature entry".into()));
        }
        let s = x + y;
        if s > T::zero() {
            acc = acc + (x - y) * (x - y) / s;
        }
    }
    Ok(acc * T::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_normalize() {
        let s = compute_signature(&[0, 0, 1], 2).unwrap();
        assert!((s.0[0] - 2.0 / 3.0).abs() < 1e-15 && (s.0[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(compute_signature(&[2], 2).is_err());
        assert_eq!(compute_signature(&[], 3).unwrap(), Signature::zeros(3));
    }

    #[test]
    fn chi_square_hand_values() {
        assert_eq!(chi_square(&[0.3f64, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((chi_square(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let expected: f64 = 0.5 * (0.0625 / 0.75 + 0.0625 / 1.25);
        assert!((chi_square(&[0.5f64, 0.5], &[0.25, 0.75]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.0666667).abs() < 1e-7);
        assert!(chi_square(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
        assert!((chi_square(&[0.5f32, 0.5], &[0.25, 0.75]).unwrap() - 0.0666667).abs() < 1e-6);
    }

    fn sig(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, len).prop_map(|v| Signature::from_weights(&v).unwrap().0)
    }

    proptest! {
        #[test]
        fn permutation_invariant(stream in proptest::collection::vec(0usize..5, 1..40), rot in 0usize..40) {
            let mut p = stream.clone();
            p.rotate_left(rot % stream.len());
            p.reverse();
            prop_assert_eq!(compute_signature(&stream, 5).unwrap(), compute_signature(&p, 5).unwrap());
            let s: f64 = compute_signature(&stream, 5).unwrap().0.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn concatenation_is_weighted_mixture(a in proptest::collection::vec(0usize..4, 1..30), b in proptest::collection::vec(0usize..4, 1..30)) {
            let joined: Vec<usize> = a.iter().chain(&b).copied().collect();
            let sa = compute_signature(&a, 4).unwrap();
            let sb = compute_signature(&b, 4).unwrap();
            let sj = compute_signature(&joined, 4).unwrap();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            for k in 0..4 {
                prop_assert!((sj.0[k] - (na * sa.0[k] + nb * sb.0[k]) / (na + nb)).abs() < 1e-12);
            }
        }

        #[test]
        fn chi_square_bounded_and_symmetric(a in sig(6), b in sig(6)) {
            let d = chi_square(&a, &b).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
            prop_assert_eq!(d, chi_square(&b, &a).unwrap());
            prop_assert!(chi_square(&a, &a).unwrap() == 0.0);
        }
    }
}
