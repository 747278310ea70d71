use serde::{Deserialize, Serialize};

use crate::audio::BeatGrid;
use crate::error::{Error, Result};
use crate::io::FootContactLabels;
use crate::quat::Vec3;
use crate::{Clip, Pose};

/// Where a word came from in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordSource {
    pub dance: usize,
    pub index: usize,
}

/// Beat-delimited pose sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionWord {
    pub frames: Vec<Pose>,
    pub contacts: Vec<[u8; 2]>,
    /// Source frame span `[start, end)`.
    pub span: (usize, usize),
    pub source: Option<WordSource>,
    /// Root world position just before the first frame.
    #[serde(default = "Vec3::zero")]
    pub origin: Vec3<f64>,
}

impl MotionWord {
    pub fn new(frames: Vec<Pose>, contacts: Vec<[u8; 2]>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFew(format!("word of {} frames", frames.len())));
        }
        if contacts.len() != frames.len() {
            return Err(Error::Schema(format!("{} contacts for {} frames", contacts.len(), frames.len())));
        }
        let n = frames.len();
        Ok(Self { frames, contacts, span: (0, n), source: None, origin: Vec3::zero() })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_displacement(&self) -> Vec3<f64> {
        self.frames.iter().fold(Vec3::zero(), |a, f| a + f.root_displacement)
    }
}

/// Splits a clip on its beats: word `k` covers `[t_k, t_{k+1})`. Frames before
/// the first and from the last beat on are dropped.
pub fn segment_words(clip: &Clip, contacts: &FootContactLabels, beats: &BeatGrid) -> Result<Vec<MotionWord>> {
    let b = &beats.beat_frames;
    if b.len() < 2 {
        return Err(Error::TooFew(format!("{} beats, need at least 2", b.len())));
    }
    if contacts.len() != clip.len() {
        return Err(Error::Schema(format!("{} contacts for {} frames", contacts.len(), clip.len())));
    }
    if b.windows(2).any(|w| w[1] <= w[0]) || *b.last().unwrap() > clip.len() {
        return Err(Error::InvalidArgument("beats must increase and lie within the clip".into()));
    }
    let positions = clip.root_positions();
    b.windows(2)
        .enumerate()
        .map(|(k, w)| {
            let mut word = MotionWord::new(clip.frames[w[0]..w[1]].to_vec(), contacts.frames[w[0]..w[1]].to_vec())?;
            word.span = (w[0], w[1]);
            word.source = Some(WordSource { dance: 0, index: k });
            word.origin = if w[0] == 0 { clip.root_origin } else { positions[w[0] - 1] };
            Ok(word)
        })
        .collect()
}

/// Resamples a word to `target_len` frames over normalized time. Rotations are
/// slerped per joint; the root trajectory is interpolated on accumulated
/// displacement so the total is preserved. Contacts take the nearest source
/// frame.
pub fn timescale_word(word: &MotionWord, target_len: usize) -> Result<MotionWord> {
    let n = word.len();
    if n < 2 || target_len < 2 {
        return Err(Error::TooFew(format!("timescale {n} -> {target_len} frames")));
    }
    if n == target_len {
        return Ok(word.clone());
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = Vec3::zero();
    for f in &word.frames {
        acc += f.root_displacement;
        cumulative.push(acc);
    }
    let step = (n - 1) as f64 / (target_len - 1) as f64;
    let mut frames: Vec<Pose> = Vec::with_capacity(target_len);
    let mut contacts = Vec::with_capacity(target_len);
    let mut prev = Vec3::zero();
    for m in 0..target_len {
        let u = if m == target_len - 1 { (n - 1) as f64 } else { m as f64 * step };
        let i = (u.floor() as usize).min(n - 2);
        let a = u - i as f64;
        let rotations = word.frames[i]
            .rotations
            .iter()
            .zip(&word.frames[i + 1].rotations)
            .map(|(p, q)| p.slerp(*q, a))
            .collect();
        let c = if m == 0 { cumulative[0] } else { cumulative[i].lerp(cumulative[i + 1], a) };
        frames.push(Pose { root_displacement: c - prev, rotations });
        prev = c;
        contacts.push(word.contacts[u.round() as usize]);
    }
    Ok(MotionWord { frames, contacts, span: word.span, source: word.source, origin: word.origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth_beat_grid;
    use crate::quat::Quaternion;
    use crate::synthetic::{biped, standing_clip};
    use proptest::prelude::*;

    fn grid(beats: Vec<usize>, frames: usize) -> BeatGrid {
        let mut g = synth_beat_grid(120.0, 30.0, frames, 0).unwrap();
        g.rhythmic = BeatGrid::surrogate_rhythmic(&beats, frames);
        g.spectral = vec![[0.0; 87]; beats.len().saturating_sub(1)];
        g.beat_frames = beats;
        g.validate().unwrap();
        g
    }

    #[test]
    fn two_words_of_thirteen() {
        let clip = standing_clip(27);
        let w = segment_words(&clip, &FootContactLabels::zeros(27), &grid(vec![0, 13, 26], 27)).unwrap();
        assert_eq!(w.iter().map(|w| w.len()).collect::<Vec<_>>(), vec![13, 13]);
    }

    #[test]
    fn leading_and_trailing_frames_dropped() {
        let clip = standing_clip(30);
        let w = segment_words(&clip, &FootContactLabels::zeros(30), &grid(vec![5, 15], 30)).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].span, (5, 15));
        assert_eq!(w[0].len(), 10);
    }

    #[test]
    fn one_beat_is_an_error() {
        let clip = standing_clip(30);
        assert!(segment_words(&clip, &FootContactLabels::zeros(30), &grid(vec![5], 30)).is_err());
    }

    proptest! {
        #[test]
        fn word_lengths_cover_beat_span(gaps in proptest::collection::vec(2usize..20, 1..12), lead in 0usize..5) {
            let mut beats = vec![lead];
            for g in &gaps { beats.push(beats.last().unwrap() + g); }
            let frames = beats.last().unwrap() + 3;
            let clip = standing_clip(frames);
            let words = segment_words(&clip, &FootContactLabels::zeros(frames), &grid(beats.clone(), frames)).unwrap();
            let total: usize = words.iter().map(|w| w.len()).sum();
            prop_assert_eq!(total, beats.last().unwrap() - beats[0]);
        }
    }

    fn moving_word(n: usize, speed: f64) -> MotionWord {
        let j = biped().joint_count();
        let frames = (0..n)
            .map(|i| {
                let mut p = Pose::identity(j);
                let t = i as f64 / (n - 1) as f64;
                p.rotations[3] = Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 1.2 * t);
                p.root_displacement = Vec3::new(speed * (1.0 + t), 0.5, -speed);
                p
            })
            .collect();
        MotionWord::new(frames, vec![[0, 0]; n]).unwrap()
    }

    #[test]
    fn thirteen_is_identity() {
        let w = moving_word(13, 1.0);
        assert_eq!(timescale_word(&w, 13).unwrap(), w);
    }

    #[test]
    fn downscale_preserves_displacement() {
        let w = moving_word(26, 1.3);
        let s = timescale_word(&w, 13).unwrap();
        assert_eq!(s.len(), 13);
        assert!((s.total_displacement() - w.total_displacement()).norm() < 1e-6);
    }

    fn path_length(w: &MotionWord, joint: usize) -> f64 {
        w.frames.windows(2).map(|p| (p[0].rotations[joint].inverse() * p[1].rotations[joint]).angle()).sum()
    }

    #[test]
    fn upscale_preserves_rotation_path() {
        let w = moving_word(7, 0.2);
        let s = timescale_word(&w, 13).unwrap();
        assert!((path_length(&s, 3) - path_length(&w, 3)).abs() < 1e-3);
        assert!((s.total_displacement() - w.total_displacement()).norm() < 1e-6);
    }
}
