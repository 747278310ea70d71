use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CorpusEntry;
use crate::Skeleton;

use super::embedding::{embed_word, fit_embedding, fit_embedding_reduced, EmbeddingBasis};
use super::kmeans::{kmeans_restarts, nearest, squared_distance};
use super::signature::{compute_signature, Signature};
use super::transition::{build_transition_matrix, TransitionMatrix};
use super::word::{segment_words, MotionWord, WordSource};

/// Motif centroids, representatives and transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifTable {
    pub skeleton: Arc<Skeleton>,
    pub fps: f64,
    pub basis: EmbeddingBasis,
    pub centroids: Vec<Vec<f64>>,
    /// Centroid-nearest member of each cluster.
    pub motif_words: Vec<MotionWord>,
    /// Embeddings of `motif_words`.
    pub motif_vectors: Vec<Vec<f64>>,
    pub transition: TransitionMatrix,
}

impl MotifTable {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn check_motif(&self, id: usize) -> Result<()> {
        if id >= self.k() {
            return Err(Error::MotifOutOfRange { id, k: self.k() });
        }
        Ok(())
    }

    /// Closest centroid to the word's embedding; ties go to the lowest id.
    pub fn assign_motif(&self, word: &MotionWord) -> Result<usize> {
        Ok(self.assign_vector(&embed_word(word, &self.basis)?))
    }

    pub fn assign_vector(&self, v: &[f64]) -> usize {
        nearest(v, &self.centroids).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub dim: usize,
    pub word_frames: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Independent k-means++ runs; the lowest-inertia one is kept.
    pub restarts: usize,
    /// Shrink `dim` when the corpus has too few words instead of failing.
    pub auto_reduce: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: crate::MOTIF_COUNT,
            dim: crate::EMBEDDING_DIM,
            word_frames: crate::WORD_FRAMES,
            seed: 0,
            max_iters: 300,
            restarts: 8,
            auto_reduce: true,
        }
    }
}

/// A table together with the clustered corpus words it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifLibrary {
    pub table: MotifTable,
    /// Corpus words in corpus order.
    pub words: Vec<MotionWord>,
    pub assignments: Vec<usize>,
    /// Motif stream of every dance.
    pub streams: Vec<Vec<usize>>,
    pub dance_genres: Vec<String>,
    /// Average dance signature per genre.
    pub templates: BTreeMap<String, Signature>,
    /// Average over all dances.
    pub overall: Signature,
}

impl MotifLibrary {
    /// Word indices of cluster `id`, in corpus order.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &a)| a == id).map(|(i, _)| i).collect()
    }

    pub fn member_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.table.k()];
        self.assignments.iter().for_each(|&a| c[a] += 1);
        c
    }

    /// Genre template, or the all-dance average when `genre` is `None`.
    pub fn template(&self, genre: Option<&str>) -> Result<&Signature> {
        match genre {
            None => Ok(&self.overall),
            Some(g) => self.templates.get(g).ok_or_else(|| Error::InvalidArgument(format!("unknown genre `{g}`"))),
        }
    }
}

/// Segments every dance on its beats, tagging words with their source.
pub fn corpus_words(entries: &[CorpusEntry]) -> Result<(Vec<MotionWord>, Vec<usize>)> {
    let mut words = Vec::new();
    let mut per_dance = Vec::with_capacity(entries.len());
    for (d, e) in entries.iter().enumerate() {
        if !e.clip.skeleton.is_compatible(&entries[0].clip.skeleton, 1e-6) {
            return Err(Error::SkeletonMismatch(format!("dance `{}` uses a different skeleton", e.name)));
        }
        let ws = segment_words(&e.clip, &e.contacts, &e.beats)?;
        per_dance.push(ws.len());
        words.extend(ws.into_iter().map(|mut w| {
            w.source = Some(WordSource { dance: d, index: w.source.map_or(0, |s| s.index) });
            w
        }));
    }
    Ok((words, per_dance))
}

/// Segment, embed, cluster, pick representatives, count transitions and
/// average genre templates.
pub fn build_library(entries: &[CorpusEntry], cfg: &ClusterConfig) -> Result<MotifLibrary> {
    if entries.is_empty() {
        return Err(Error::TooFew("empty corpus".into()));
    }
    let (words, per_dance) = corpus_words(entries)?;
    let basis = if cfg.auto_reduce {
        fit_embedding_reduced(&words, cfg.dim, cfg.word_frames)?
    } else {
        fit_embedding(&words, cfg.dim, cfg.word_frames)?
    };
    let vectors: Vec<Vec<f64>> = words.iter().map(|w| embed_word(w, &basis)).collect::<Result<_>>()?;
    let km = kmeans_restarts(&vectors, cfg.k, cfg.seed, cfg.max_iters, cfg.restarts.max(1))?;
    let library = assemble(entries, words, &per_dance, basis, km.centroids, km.assignments, &vectors)?;
    Ok(library)
}

/// Builds the library from fixed clustering results.
pub(crate) fn assemble(
    entries: &[CorpusEntry],
    words: Vec<MotionWord>,
    per_dance: &[usize],
    basis: EmbeddingBasis,
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    vectors: &[Vec<f64>],
) -> Result<MotifLibrary> {
    let k = centroids.len();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; k];
    for (i, (v, &a)) in vectors.iter().zip(&assignments).enumerate() {
        let d = squared_distance(v, &centroids[a]);
        if best[a].is_none_or(|(_, bd)| d < bd) {
            best[a] = Some((i, d));
        }
    }
    let reps: Vec<usize> = best
        .iter()
        .enumerate()
        .map(|(c, b)| b.map(|b| b.0).ok_or(Error::EmptyCluster(c)))
        .collect::<Result<_>>()?;
    let mut streams = Vec::with_capacity(per_dance.len());
    let mut at = 0;
    for &n in per_dance {
        streams.push(assignments[at..at + n].to_vec());
        at += n;
    }
    let transition = build_transition_matrix(&streams, k)?;
    let signatures: Vec<Signature> = streams.iter().map(|s| compute_signature(s, k)).collect::<Result<_>>()?;
    let mut by_genre: BTreeMap<String, Vec<Signature>> = BTreeMap::new();
    for (e, s) in entries.iter().zip(&signatures) {
        if !s.0.iter().all(|&v| v == 0.0) {
            by_genre.entry(e.genre.clone()).or_default().push(s.clone());
        }
    }
    let templates = by_genre
        .iter()
        .map(|(g, list)| Ok((g.clone(), Signature::average(list)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let nonempty: Vec<Signature> = by_genre.into_values().flatten().collect();
    let overall = Signature::average(&nonempty)?;
    let table = MotifTable {
        skeleton: entries[0].clip.skeleton.clone(),
        fps: entries[0].clip.fps,
        basis,
        centroids,
        motif_words: reps.iter().map(|&i| words[i].clone()).collect(),
        motif_vectors: reps.iter().map(|&i| vectors[i].clone()).collect(),
        transition,
    };
    Ok(MotifLibrary {
        table,
        words,
        assignments,
        streams,
        dance_genres: entries.iter().map(|e| e.genre.clone()).collect(),
        templates,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{synthetic_corpus, SyntheticCorpusConfig};

    fn library(k: usize) -> (MotifLibrary, crate::synthetic::SyntheticCorpus) {
        let cfg = SyntheticCorpusConfig { prototypes: 6, dances: 4, beats_per_dance: (20, 30), ..Default::default() };
        let corpus = synthetic_corpus(&cfg, 11);
        let lib = build_library(&corpus.entries(), &ClusterConfig { k, dim: 16, seed: 3, ..Default::default() }).unwrap();
        (lib, corpus)
    }

    #[test]
    fn motif_words_assign_to_themselves() {
        let (lib, _) = library(6);
        for (i, w) in lib.table.motif_words.iter().enumerate() {
            assert_eq!(lib.table.assign_motif(w).unwrap(), i);
        }
        assert_eq!(lib.assignments.len(), lib.words.len());
        lib.table.transition.validate().unwrap();
    }

    #[test]
    fn recovers_prototypes() {
        let (lib, corpus) = library(6);
        let truth: Vec<usize> = corpus.dances.iter().flat_map(|d| d.labels.clone()).collect();
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                assert_eq!(truth[i] == truth[j], lib.assignments[i] == lib.assignments[j]);
            }
        }
    }

    #[test]
    fn assignment_matches_linear_scan() {
        let (lib, _) = library(5);
        for w in lib.words.iter().take(30) {
            let e = embed_word(w, &lib.table.basis).unwrap();
            let mut best = 0;
            for c in 1..lib.table.k() {
                if squared_distance(&e, &lib.table.centroids[c]) < squared_distance(&e, &lib.table.centroids[best]) {
                    best = c;
                }
            }
            assert_eq!(lib.table.assign_motif(w).unwrap(), best);
        }
    }

    #[test]
    fn identical_dances_share_template() {
        let cfg = SyntheticCorpusConfig { prototypes: 4, dances: 1, beats_per_dance: (20, 20), ..Default::default() };
        let one = synthetic_corpus(&cfg, 5).entries().remove(0);
        let entries = vec![one.clone(), one.clone(), one];
        let lib = build_library(&entries, &ClusterConfig { k: 4, dim: 8, ..Default::default() }).unwrap();
        let s = compute_signature(&lib.streams[0], 4).unwrap();
        for (a, b) in lib.templates["synthetic"].0.iter().zip(&s.0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(lib.templates["synthetic"], lib.overall);
    }

    #[test]
    fn reproducible() {
        assert_eq!(library(5).0, library(5).0);
    }
}
