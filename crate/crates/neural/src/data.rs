//! Training sequences: per-frame conditioning aligned with target frames.

use choreo_core::audio::BeatGrid;
use choreo_core::io::{CorpusEntry, FootContactLabels};
use choreo_core::motif::{segment_words, MotifTable};
use choreo_core::motion::antipodal_correct;
use choreo_core::{Clip, Skeleton};

use crate::config::RHYTHMIC_DIM;
use crate::error::{NeuralError, Result};
use crate::grad::V;
use crate::loss::{fk_points, Frame};

/// A beat interval `[start, end)` and the motif vector it should embed to.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTarget {
    pub span: (usize, usize),
    pub motif: Vec<f64>,
}

/// One dance prepared for training.
///
/// The motif vector is constant within each word span.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSequence {
    pub rhythmic: Vec<[f64; RHYTHMIC_DIM]>,
    pub motif: Vec<Vec<f64>>,
    pub frames: Vec<Frame>,
    pub words: Vec<WordTarget>,
    /// FK points of every true frame.
    pub(crate) points: Vec<Vec<V>>,
}

impl TrainSequence {
    pub fn new(
        skeleton: &Skeleton,
        rhythmic: Vec<[f64; RHYTHMIC_DIM]>,
        motif: Vec<Vec<f64>>,
        frames: Vec<Frame>,
        words: Vec<WordTarget>,
    ) -> Result<Self> {
        let n = frames.len();
        if rhythmic.len() != n || motif.len() != n {
            return Err(NeuralError::Data(format!(
                "{n} frames but {} rhythmic rows and {} motif rows",
                rhythmic.len(),
                motif.len()
            )));
        }
        if frames.iter().any(|f| f.pose.len() != skeleton.pose_dim()) {
            return Err(NeuralError::Dimension("frame size does not match the skeleton".into()));
        }
        let d = motif.first().map_or(0, Vec::len);
        if motif.iter().any(|m| m.len() != d) {
            return Err(NeuralError::Dimension("motif vectors differ in length".into()));
        }
        for w in &words {
            let (a, b) = w.span;
            if a >= b || b > n {
                return Err(NeuralError::Data(format!("word span {a}..{b} outside {n} frames")));
            }
            if w.motif.len() != d || motif[a..b].iter().any(|m| *m != w.motif) {
                return Err(NeuralError::Data(format!("motif vector not constant over word {a}..{b}")));
            }
        }
        let points = frames.iter().map(|f| fk_points(skeleton, &f.pose).points).collect();
        Ok(Self { rhythmic, motif, frames, words, points })
    }

    /// Builds a sequence from a clip and its beats, labelling each word with
    /// its nearest motif. Frames outside the beat range take the motif of the
    /// nearest word.
    pub fn from_clip(clip: &Clip, contacts: &FootContactLabels, beats: &BeatGrid, table: &MotifTable) -> Result<Self> {
        let n = clip.len();
        if beats.frame_count() < n {
            return Err(NeuralError::Data(format!("{} rhythmic rows for {n} frames", beats.frame_count())));
        }
        let clip = antipodal_correct(clip)?;
        let segments = segment_words(&clip, contacts, beats)?;
        let mut words = Vec::with_capacity(segments.len());
        for w in &segments {
            let id = table.assign_motif(w)?;
            words.push(WordTarget { span: w.span, motif: table.motif_vectors[id].clone() });
        }
        let mut motif = Vec::with_capacity(n);
        for t in 0..n {
            let k = words.partition_point(|w| w.span.1 <= t).min(words.len() - 1);
            motif.push(words[k].motif.clone());
        }
        let frames = clip
            .frames
            .iter()
            .zip(&contacts.frames)
            .map(|(f, c)| Frame { pose: f.to_vec(), contacts: [c[0] as f64, c[1] as f64] })
            .collect();
        Self::new(&clip.skeleton, beats.rhythmic[..n].to_vec(), motif, frames, words)
    }

    pub fn from_entry(entry: &CorpusEntry, table: &MotifTable) -> Result<Self> {
        Self::from_clip(&entry.clip, &entry.contacts, &entry.beats, table)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn motif_dim(&self) -> usize {
        self.motif.first().map_or(0, Vec::len)
    }

    /// Network input for frame `t` with the given pose/contact block.
    pub(crate) fn input(&self, t: usize, pose: &[f64], contacts: [f64; 2]) -> Vec<f64> {
        let mut x = Vec::with_capacity(RHYTHMIC_DIM + self.motif_dim() + pose.len() + 2);
        x.extend_from_slice(&self.rhythmic[t]);
        x.extend_from_slice(&self.motif[t]);
        x.extend_from_slice(pose);
        x.extend_from_slice(&contacts);
        x
    }
}

/// A training window: `len` consecutive frames of one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub sequence: usize,
    pub start: usize,
    pub len: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use choreo_core::motif::{build_library, ClusterConfig};
    use choreo_core::synthetic::{synthetic_corpus, SyntheticCorpusConfig};

    #[test]
    fn motif_constant_within_beats() {
        let corpus = synthetic_corpus(&SyntheticCorpusConfig { dances: 3, beats_per_dance: (15, 18), ..Default::default() }, 2);
        let entries = corpus.entries();
        let lib = build_library(&entries, &ClusterConfig { k: 4, dim: 6, ..Default::default() }).unwrap();
        let s = TrainSequence::from_entry(&entries[0], &lib.table).unwrap();
        assert_eq!(s.len(), entries[0].clip.len());
        assert_eq!(s.words.len(), entries[0].beats.beat_frames.len() - 1);
        for w in &s.words {
            assert!(s.motif[w.span.0..w.span.1].iter().all(|m| *m == w.motif));
        }
    }

    #[test]
    fn rejects_inconsistent_motifs() {
        let skel = choreo_core::synthetic::biped();
        let pose = choreo_core::Pose::identity(skel.joint_count()).to_vec();
        let frames = vec![Frame { pose, contacts: [0.0; 2] }; 4];
        let motif = vec![vec![1.0], vec![1.0], vec![0.0], vec![0.0]];
        let words = vec![WordTarget { span: (0, 3), motif: vec![1.0] }];
        assert!(TrainSequence::new(&skel, vec![[0.0; 4]; 4], motif, frames, words).is_err());
    }
}
