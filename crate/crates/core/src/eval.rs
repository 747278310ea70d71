//! Evaluation: kinematic beats and their alignment with music beats, and
//! signature convergence reports.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::choreography::convergence_trace;
use crate::error::{Error, Result};
use crate::motif::Signature;
use crate::motion::forward_kinematics;
use crate::Clip;

/// Savitzky-Golay smoothing: each sample is replaced by the value at its
/// position of the least-squares polynomial of degree `order` over a window
/// of `window` samples. Near the ends the window is shifted inward rather
/// than padded. `order` is capped at `window - 1`.
pub fn savgol(y: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("Savitzky-Golay window {window} must be odd")));
    }
    if y.len() < window {
        return Err(Error::TooFew(format!("{} samples for a window of {window}", y.len())));
    }
    let order = order.min(window - 1);
    if window == 1 {
        return Ok(y.to_vec());
    }
    let h = (window / 2) as f64;
    let x = DMatrix::from_fn(window, order + 1, |i, p| (i as f64 - h).powi(p as i32));
    let xt = x.transpose();
    let inv = (&xt * &x)
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular Savitzky-Golay system".into()))?;
    // row e of the hat matrix evaluates the fit at window position e
    let hat = &x * inv * xt;
    let n = y.len();
    let half = window / 2;
    Ok((0..n)
        .map(|t| {
            let s = t.saturating_sub(half).min(n - window);
            let e = t - s;
            (0..window).map(|i| hat[(e, i)] * y[s + i]).sum()
        })
        .collect())
}

/// Total joint speed per frame: the sum over joints of the distance moved
/// since the previous frame. Frame 0 repeats frame 1.
pub fn joint_speed(clip: &Clip) -> Vec<f64> {
    let roots = clip.root_positions();
    let pos: Vec<_> = clip
        .frames
        .iter()
        .zip(&roots)
        .map(|(f, r)| forward_kinematics(f, &clip.skeleton, *r))
        .collect();
    let mut speed: Vec<f64> = std::iter::once(0.0)
        .chain(pos.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (*b - *a).norm()).sum()))
        .collect();
    if speed.len() > 1 {
        speed[0] = speed[1];
    }
    speed
}

/// Indices `t` with `s[t-1] > s[t] + margin` and `s[t+1] > s[t] + margin`.
pub fn strict_minima(s: &[f64], margin: f64) -> Vec<usize> {
    (1..s.len().saturating_sub(1))
        .filter(|&t| s[t - 1] > s[t] + margin && s[t + 1] > s[t] + margin)
        .collect()
}

/// Strict local minima of the smoothed total joint speed. Differences below
/// `1e-9` of the peak speed count as ties.
pub fn kinematic_beats(clip: &Clip, sg_window: usize, sg_order: usize) -> Result<Vec<usize>> {
    kinematic_beats_with_prominence(clip, sg_window, sg_order, 0.0)
}

/// As [`kinematic_beats`], keeping only minima at least `prominence` below
/// both neighbours.
pub fn kinematic_beats_with_prominence(clip: &Clip, sg_window: usize, sg_order: usize, prominence: f64) -> Result<Vec<usize>> {
    if clip.len() <= sg_window {
        return Err(Error::TooFew(format!("{} frames for a window of {sg_window}", clip.len())));
    }
    let s = savgol(&joint_speed(clip), sg_window, sg_order)?;
    let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(strict_minima(&s, prominence.max(1e-9 * peak)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatAlignmentReport {
    pub kinematic_beats: Vec<usize>,
    pub music_beats: Vec<usize>,
    pub tolerance: usize,
    pub aligned: usize,
    pub ratio_kin_to_music: f64,
    pub ratio_aligned: f64,
}

/// Matches kinematic to music beats one-to-one within `tolerance` frames,
/// closest pairs first (ties by kinematic then music index).
pub fn alignment_report(kin: &[usize], music: &[usize], tolerance: usize) -> Result<BeatAlignmentReport> {
    if music.is_empty() {
        return Err(Error::TooFew("no music beats".into()));
    }
    let mut pairs = Vec::new();
    for (i, &k) in kin.iter().enumerate() {
        for (j, &m) in music.iter().enumerate() {
            let d = k.abs_diff(m);
            if d <= tolerance {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut kin_used = vec![false; kin.len()];
    let mut music_used = vec![false; music.len()];
    let mut aligned = 0;
    for (_, i, j) in pairs {
        if !kin_used[i] && !music_used[j] {
            kin_used[i] = true;
            music_used[j] = true;
            aligned += 1;
        }
    }
    Ok(BeatAlignmentReport {
        kinematic_beats: kin.to_vec(),
        music_beats: music.to_vec(),
        tolerance,
        aligned,
        ratio_kin_to_music: kin.len() as f64 / music.len() as f64,
        ratio_aligned: if kin.is_empty() { 0.0 } else { aligned as f64 / kin.len() as f64 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    /// `(beat, chi_square)` every `interval` beats and at the last beat.
    pub rows: Vec<(usize, f64)>,
    pub final_distance: Option<f64>,
}

pub fn signature_report(stream: &[usize], target: &Signature, interval: usize) -> Result<SignatureReport> {
    if interval == 0 {
        return Err(Error::InvalidArgument("report interval must be positive".into()));
    }
    let trace = convergence_trace(stream, target)?;
    let mut rows: Vec<(usize, f64)> = trace
        .iter()
        .enumerate()
        .filter(|(b, _)| (b + 1) % interval == 0)
        .map(|(b, &v)| (b, v))
        .collect();
    if let Some(&last) = trace.last() {
        if rows.last().map(|r| r.0) != Some(trace.len() - 1) {
            rows.push((trace.len() - 1, last));
        }
    }
    Ok(SignatureReport { rows, final_distance: trace.last().copied() })
}

impl SignatureReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beat,chi_square\n");
        for (b, v) in &self.rows {
            out.push_str(&format!("{b},{v}\n"));
        }
        out
    }

    /// Row-wise mean over runs with identical beat rows.
    pub fn mean(reports: &[SignatureReport]) -> Result<SignatureReport> {
        let Some(first) = reports.first() else {
            return Err(Error::TooFew("no reports".into()));
        };
        if reports.iter().any(|r| r.rows.iter().map(|x| x.0).ne(first.rows.iter().map(|x| x.0))) {
            return Err(Error::InvalidArgument("reports cover different beats".into()));
        }
        let n = reports.len() as f64;
        let rows = first
            .rows
            .iter()
            .enumerate()
            .map(|(i, (b, _))| (*b, reports.iter().map(|r| r.rows[i].1).sum::<f64>() / n))
            .collect();
        let finals: Vec<f64> = reports.iter().filter_map(|r| r.final_distance).collect();
        let final_distance = (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64);
        Ok(SignatureReport { rows, final_distance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{Quaternion, Vec3};
    use crate::rng;
    use crate::synthetic::{standing_clip, synthetic_corpus, SyntheticCorpusConfig};
    use proptest::prelude::*;

    #[test]
    fn savgol_reproduces_cubics_and_window_one() {
        let y: Vec<f64> = (0..30).map(|t| {
            let x = t as f64 * 0.1;
            1.0 - 2.0 * x + 0.5 * x * x - 0.3 * x * x * x
        }).collect();
        let s = savgol(&y, 9, 3).unwrap();
        for (a, b) in s.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
        let noisy: Vec<f64> = (0..20).map(|t| (t * 7 % 5) as f64).collect();
        assert_eq!(savgol(&noisy, 1, 3).unwrap(), noisy);
        assert!(savgol(&noisy, 4, 2).is_err());
    }

    /// Root moving along x with speed |sin(2 pi t / 20)| per frame.
    fn sine_speed_clip(n: usize) -> Clip {
        let mut clip = standing_clip(n);
        let j = clip.skeleton.joint_count() as f64;
        for (t, f) in clip.frames.iter_mut().enumerate() {
            let v = (2.0 * std::f64::consts::PI * t as f64 / 20.0).sin().abs();
            f.root_displacement = Vec3::new(if t == 0 { 0.0 } else { v / j }, 0.0, 0.0);
        }
        clip
    }

    #[test]
    fn sine_speed_minima() {
        let beats = kinematic_beats(&sine_speed_clip(100), 9, 3).unwrap();
        assert!(!beats.is_empty());
        for b in &beats {
            let r = b % 10;
            assert!(r <= 1 || r >= 9, "{b}");
        }
        assert_eq!(beats.len(), 9);
    }

    #[test]
    fn constant_velocity_has_no_beats() {
        let mut clip = standing_clip(50);
        for f in &mut clip.frames {
            f.root_displacement = Vec3::new(1.0, 0.0, 0.5);
        }
        assert!(kinematic_beats(&clip, 9, 3).unwrap().is_empty());
        assert!(kinematic_beats(&standing_clip(5), 9, 3).is_err());
    }

    #[test]
    fn rigid_motion_invariance() {
        let cfg = SyntheticCorpusConfig { dances: 1, beats_per_dance: (12, 12), ..Default::default() };
        let clip = synthetic_corpus(&cfg, 1).entries().remove(0).clip;
        let base = kinematic_beats(&clip, 9, 3).unwrap();
        let r = Quaternion::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 0.8);
        let mut moved = clip.clone();
        moved.root_origin = r.rotate(clip.root_origin) + Vec3::new(50.0, 0.0, -20.0);
        for f in &mut moved.frames {
            f.root_displacement = r.rotate(f.root_displacement);
            f.rotations[0] = r * f.rotations[0];
        }
        let s0 = joint_speed(&clip);
        let s1 = joint_speed(&moved);
        for (a, b) in s0.iter().zip(&s1) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(base, kinematic_beats(&moved, 9, 3).unwrap());
    }

    #[test]
    fn alignment_hand_cases() {
        let r = alignment_report(&[10, 20, 30], &[10, 21, 35], 1).unwrap();
        assert_eq!(r.ratio_kin_to_music, 1.0);
        assert!((r.ratio_aligned - 2.0 / 3.0).abs() < 1e-15);
        let r = alignment_report(&[5, 9], &[5, 9], 1).unwrap();
        assert_eq!((r.ratio_kin_to_music, r.ratio_aligned), (1.0, 1.0));
        let r = alignment_report(&[], &[5, 9], 1).unwrap();
        assert_eq!((r.ratio_kin_to_music, r.ratio_aligned), (0.0, 0.0));
        assert!(alignment_report(&[1], &[], 1).is_err());
        // one music beat serves one kinematic beat
        assert_eq!(alignment_report(&[9, 11], &[10], 1).unwrap().aligned, 1);
    }

    proptest! {
        #[test]
        fn aligned_ratio_monotone_in_tolerance(kin in proptest::collection::btree_set(0usize..200, 0..30), music in proptest::collection::btree_set(0usize..200, 1..30)) {
            let kin: Vec<usize> = kin.into_iter().collect();
            let music: Vec<usize> = music.into_iter().collect();
            let mut last = 0.0;
            for tol in 0..6 {
                let r = alignment_report(&kin, &music, tol).unwrap().ratio_aligned;
                prop_assert!(r >= last);
                prop_assert!((0.0..=1.0).contains(&r));
                last = r;
            }
        }
    }

    #[test]
    fn signature_reports() {
        let g = Signature(vec![0.1, 0.3, 0.6]);
        let mut r = rng::seeded(3);
        let stream: Vec<usize> = (0..500).map(|_| rng::sample_index(&g.0, &mut r).unwrap()).collect();
        let rep = signature_report(&stream, &g, 50).unwrap();
        assert_eq!(rep.rows.len(), 10);
        assert!(rep.final_distance.unwrap() < 0.1);
        let uniform = Signature::uniform(4);
        let single = signature_report(&[1; 30], &uniform, 7).unwrap();
        let closed = 0.5 * (0.75f64.powi(2) / 1.25 + 3.0 * 0.25);
        assert!((single.final_distance.unwrap() - closed).abs() < 1e-12);
        assert_eq!(single.rows.last().unwrap().0, 29);
        let empty = signature_report(&[], &g, 5).unwrap();
        assert!(empty.rows.is_empty() && empty.final_distance.is_none());
        let m = SignatureReport::mean(&[rep.clone(), rep.clone()]).unwrap();
        assert_eq!(m, rep);
        assert!(rep.to_csv().starts_with("beat,chi_square\n49,"));
    }
}
