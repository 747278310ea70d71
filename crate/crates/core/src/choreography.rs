//! Choreography level: picks the next motif so that the running signature
//! drifts toward a target template while following observed transitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motif::{chi_square, Signature, TransitionMatrix};
use crate::rng::{self, Rng};

/// Pin a motif to a beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotifConstraint {
    pub beat: usize,
    pub motif: usize,
}

/// Per-motif weighting of the signature gap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `|s^k - s^G|`
    Absolute,
    /// `max(s^G - s^k, 0)`: only under-represented motifs gain weight.
    #[default]
    DeficitOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Signature gap times transition row.
    #[default]
    Guided,
    /// Transition row alone (signature term ablated).
    TransitionOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoreographyOptions {
    pub weighting: Weighting,
    pub generator: Generator,
}

#[derive(Debug, Clone)]
pub struct ChoreographyState<'a> {
    pub current: Option<usize>,
    pub counts: Vec<u64>,
    target: &'a Signature,
    transition: &'a TransitionMatrix,
    options: ChoreographyOptions,
    rng: Rng,
}

impl<'a> ChoreographyState<'a> {
    pub fn new(transition: &'a TransitionMatrix, target: &'a Signature, seed: u64, options: ChoreographyOptions) -> Result<Self> {
        let k = transition.k();
        if target.k() != k {
            return Err(Error::InvalidArgument(format!("template has {} bins, table has K = {k}", target.k())));
        }
        if target.0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || target.0.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("template signature must be a non-empty histogram".into()));
        }
        Ok(Self { current: None, counts: vec![0; k], target, transition, options, rng: rng::seeded(seed) })
    }

    pub fn signature(&self) -> Signature {
        Signature::from_counts(&self.counts)
    }

    /// Distribution the next motif is drawn from. Before the first motif this
    /// is the template itself.
    pub fn distribution(&self) -> Vec<f64> {
        let Some(j) = self.current else {
            return normalize(&self.target.0).expect("validated template");
        };
        let row = self.transition.row(j);
        if row.iter().all(|&t| t == 0.0) {
            return normalize(&self.target.0).expect("validated template");
        }
        if self.options.generator == Generator::TransitionOnly {
            return row.to_vec();
        }
        let s = self.signature();
        let w: Vec<f64> = s
            .0
            .iter()
            .zip(&self.target.0)
            .zip(row)
            .map(|((sk, sg), t)| {
                let gap = match self.options.weighting {
                    Weighting::Absolute => (sk - sg).abs(),
                    Weighting::DeficitOnly => (sg - sk).max(0.0),
                };
                gap * t
            })
            .collect();
        normalize(&w).unwrap_or_else(|| row.to_vec())
    }

    /// Draws (or takes the pinned) next motif and records it.
    pub fn next_motif(&mut self, constraint: Option<&MotifConstraint>) -> Result<usize> {
        let k = self.counts.len();
        let chosen = match constraint {
            Some(c) if c.motif >= k => return Err(Error::MotifOutOfRange { id: c.motif, k }),
            Some(c) => c.motif,
            None => rng::sample_index(&self.distribution(), &mut self.rng).expect("distribution is normalized"),
        };
        self.counts[chosen] += 1;
        self.current = Some(chosen);
        Ok(chosen)
    }
}

fn normalize(w: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| w.iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoreographyRun {
    pub motifs: Vec<usize>,
    /// Chi-square distance to the template after each beat.
    pub trace: Vec<f64>,
}

/// Checks ids and beats and returns the pin for every beat.
pub fn constraint_slots(constraints: &[MotifConstraint], beats: usize, k: usize) -> Result<Vec<Option<MotifConstraint>>> {
    let mut slots = vec![None; beats];
    for c in constraints {
        if c.motif >= k {
            return Err(Error::MotifOutOfRange { id: c.motif, k });
        }
        if c.beat >= beats {
            return Err(Error::InvalidArgument(format!("constraint on beat {} of {beats}", c.beat)));
        }
        match slots[c.beat] {
            Some(MotifConstraint { motif, .. }) if motif != c.motif => {
                return Err(Error::InvalidArgument(format!("conflicting constraints on beat {}", c.beat)));
            }
            _ => slots[c.beat] = Some(*c),
        }
    }
    Ok(slots)
}

/// One motif per beat: the first from the template, the rest by
/// [`ChoreographyState::next_motif`].
pub fn run_choreography(
    transition: &TransitionMatrix,
    target: &Signature,
    beats: usize,
    seed: u64,
    constraints: &[MotifConstraint],
    options: ChoreographyOptions,
) -> Result<ChoreographyRun> {
    let slots = constraint_slots(constraints, beats, transition.k())?;
    let mut state = ChoreographyState::new(transition, target, seed, options)?;
    let motifs = slots.iter().map(|c| state.next_motif(c.as_ref())).collect::<Result<Vec<_>>>()?;
    let trace = convergence_trace(&motifs, target)?;
    Ok(ChoreographyRun { motifs, trace })
}

/// Distance of the running signature to the template after every beat.
pub fn convergence_trace(motifs: &[usize], target: &Signature) -> Result<Vec<f64>> {
    let k = target.k();
    let mut counts = vec![0u64; k];
    motifs
        .iter()
        .map(|&m| {
            if m >= k {
                return Err(Error::MotifOutOfRange { id: m, k });
            }
            counts[m] += 1;
            chi_square(&Signature::from_counts(&counts).0, &target.0)
        })
        .collect()
}

pub fn constraints_from_json(text: &str) -> Result<Vec<MotifConstraint>> {
    Ok(serde_json::from_str(text)?)
}

/// `beat,chi_square` rows.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("beat,chi_square\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::compute_signature;

    fn hand_case() -> (TransitionMatrix, Signature) {
        let t = TransitionMatrix {
            rows: vec![vec![0.2, 0.5, 0.3], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            empty: vec![false; 3],
        };
        (t, Signature(vec![0.2, 0.4, 0.4]))
    }

    const ABS: ChoreographyOptions =
        ChoreographyOptions { weighting: Weighting::Absolute, generator: Generator::Guided };

    #[test]
    fn hand_distribution() {
        let (t, g) = hand_case();
        let mut s = ChoreographyState::new(&t, &g, 0, ABS).unwrap();
        s.current = Some(0);
        s.counts = vec![5, 3, 2];
        let p = s.distribution();
        let expected = [0.06 / 0.17, 0.05 / 0.17, 0.06 / 0.17];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p[0] - 0.35294).abs() < 1e-5 && (p[1] - 0.29412).abs() < 1e-5);
    }

    #[test]
    fn hand_sampler_frequencies() {
        let (t, g) = hand_case();
        let mut s = ChoreographyState::new(&t, &g, 42, ABS).unwrap();
        s.current = Some(0);
        s.counts = vec![5, 3, 2];
        let p = s.distribution();
        let mut hist = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            hist[rng::sample_index(&p, &mut s.rng).unwrap()] += 1;
        }
        for (h, q) in hist.iter().zip(&p) {
            assert!((*h as f64 / n as f64 - q).abs() < 0.01);
        }
    }

    #[test]
    fn one_hot_row_is_forced() {
        let (t, g) = hand_case();
        let mut s = ChoreographyState::new(&t, &g, 1, Default::default()).unwrap();
        s.current = Some(1);
        s.counts = vec![1, 1, 0];
        for _ in 0..20 {
            let mut c = s.clone();
            assert_eq!(c.next_motif(None).unwrap(), 2);
        }
    }

    #[test]
    fn zero_gap_falls_back_to_transitions() {
        let (t, g) = hand_case();
        let mut s = ChoreographyState::new(&t, &g, 1, Default::default()).unwrap();
        s.current = Some(0);
        s.counts = vec![1, 2, 2];
        assert_eq!(s.distribution(), t.rows[0]);
    }

    #[test]
    fn empty_row_falls_back_to_template() {
        let t = TransitionMatrix { rows: vec![vec![0.0; 2]; 2], empty: vec![true; 2] };
        let g = Signature(vec![0.25, 0.75]);
        let mut s = ChoreographyState::new(&t, &g, 1, Default::default()).unwrap();
        s.current = Some(0);
        assert_eq!(s.distribution(), vec![0.25, 0.75]);
    }

    #[test]
    fn guided_support_within_transition_row() {
        let (t, g) = hand_case();
        let run = run_choreography(&t, &g, 300, 9, &[], Default::default()).unwrap();
        for w in run.motifs.windows(2) {
            assert!(t.rows[w[0]][w[1]] > 0.0);
        }
        assert_eq!(run, run_choreography(&t, &g, 300, 9, &[], Default::default()).unwrap());
    }

    #[test]
    fn constraints_are_verbatim() {
        let (t, g) = hand_case();
        let pins: Vec<MotifConstraint> = (0..10).map(|b| MotifConstraint { beat: b, motif: (b * 7) % 3 }).collect();
        let run = run_choreography(&t, &g, 10, 3, &pins, Default::default()).unwrap();
        assert_eq!(run.motifs, pins.iter().map(|c| c.motif).collect::<Vec<_>>());
        let bad = [MotifConstraint { beat: 0, motif: 3 }];
        assert!(matches!(run_choreography(&t, &g, 10, 3, &bad, Default::default()), Err(Error::MotifOutOfRange { .. })));
    }

    #[test]
    fn iid_template_stream_converges() {
        let g = Signature(vec![0.1, 0.2, 0.3, 0.4]);
        let mut r = rng::seeded(5);
        let stream: Vec<usize> = (0..500).map(|_| rng::sample_index(&g.0, &mut r).unwrap()).collect();
        let trace = convergence_trace(&stream, &g).unwrap();
        assert!(trace[trace.len() - 1] < trace[0]);
        assert!(*trace.last().unwrap() < 0.01);
    }

    #[test]
    fn constant_stream_hits_closed_form() {
        let k = 5;
        let g = Signature::uniform(k);
        let trace = convergence_trace(&[2; 40], &g).unwrap();
        // one bin (1 - 1/k)^2 / (1 + 1/k), k-1 bins (1/k)
        let kf = k as f64;
        let closed = 0.5 * ((1.0 - 1.0 / kf).powi(2) / (1.0 + 1.0 / kf) + (kf - 1.0) / kf);
        assert!((trace.last().unwrap() - closed).abs() < 1e-12);
        assert!(convergence_trace(&[], &g).unwrap().is_empty());
        assert_eq!(compute_signature(&[2; 40], k).unwrap().0[2], 1.0);
    }

    #[test]
    fn json_and_csv() {
        let c = constraints_from_json(r#"[{"beat": 2, "motif": 1}]"#).unwrap();
        assert_eq!(c, vec![MotifConstraint { beat: 2, motif: 1 }]);
        assert!(constraints_from_json(r#"[{"beat": 2}]"#).is_err());
        assert_eq!(trace_csv(&[0.5, 0.25]), "beat,chi_square\n0,0.5\n1,0.25\n");
    }
}
