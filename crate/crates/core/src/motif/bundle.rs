//! On-disk motif table: a directory holding
//!
//! - `manifest.json`: sizes, fps, joint names and free-form provenance
//! - `centroids.f32`: K x d, row-major little-endian float32
//! - `basis.f32`: the mean (D values) followed by d rows of D values
//! - `transition.json`: `{"rows": [[..]], "empty": [..]}`
//! - `motifs/motif_NNNN.bvh`: representative words
//! - `motifs.json`: span, source and contact labels of each representative
//! - `library.json`: per-dance motif streams, genres and templates

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{parse_bvh, write_bvh, CorpusEntry};
use crate::motion::MotionClip;
use crate::quat::Vec3;

use super::embedding::{embed_word, EmbeddingBasis};
use super::signature::Signature;
use super::table::{corpus_words, MotifLibrary, MotifTable};
use super::transition::TransitionMatrix;
use super::word::{MotionWord, WordSource};

pub const BUNDLE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub fps: f64,
    pub word_frames: usize,
    pub input_dim: usize,
    pub joint_names: Vec<String>,
    /// Config and seed that produced the bundle.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MotifMeta {
    id: usize,
    span: (usize, usize),
    source: Option<WordSource>,
    origin: [f64; 3],
    contacts: Vec<[u8; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LibraryFile {
    streams: Vec<Vec<usize>>,
    genres: Vec<String>,
    templates: BTreeMap<String, Signature>,
    overall: Signature,
}

pub fn write_f32(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(|v| (v as f32).to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f32(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Schema(format!("{} is not a float32 array", path.display())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

fn motif_path(dir: &Path, id: usize) -> std::path::PathBuf {
    dir.join("motifs").join(format!("motif_{id:04}.bvh"))
}

impl MotifTable {
    pub fn manifest(&self, provenance: serde_json::Value) -> BundleManifest {
        BundleManifest {
            format: BUNDLE_FORMAT,
            k: self.k(),
            d: self.dim(),
            j: self.skeleton.joint_count(),
            fps: self.fps,
            word_frames: self.basis.word_frames,
            input_dim: self.basis.input_dim(),
            joint_names: self.skeleton.joints().iter().map(|j| j.name.clone()).collect(),
            provenance,
        }
    }

    pub fn save(&self, dir: &Path, provenance: serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir.join("motifs"))?;
        let manifest = self.manifest(provenance);
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        write_f32(&dir.join("centroids.f32"), self.centroids.iter().flatten().copied())?;
        write_f32(
            &dir.join("basis.f32"),
            self.basis.mean.iter().chain(self.basis.components.iter().flatten()).copied(),
        )?;
        std::fs::write(dir.join("transition.json"), serde_json::to_string(&self.transition)?)?;
        let mut meta = Vec::with_capacity(self.k());
        for (id, w) in self.motif_words.iter().enumerate() {
            // origin zero so the first displacement survives as the parsed origin
            let clip = MotionClip::new(self.skeleton.clone(), w.frames.clone(), self.fps);
            std::fs::write(motif_path(dir, id), write_bvh(&clip))?;
            meta.push(MotifMeta { id, span: w.span, source: w.source, origin: w.origin.to_array(), contacts: w.contacts.clone() });
        }
        std::fs::write(dir.join("motifs.json"), serde_json::to_string(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Self, BundleManifest)> {
        let manifest: BundleManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(Error::Schema(format!("bundle format {} not supported", manifest.format)));
        }
        let (k, d, big_d) = (manifest.k, manifest.d, manifest.input_dim);
        let c = read_f32(&dir.join("centroids.f32"))?;
        if c.len() != k * d {
            return Err(Error::Schema(format!("centroids.f32 holds {} values, expected {}", c.len(), k * d)));
        }
        let b = read_f32(&dir.join("basis.f32"))?;
        if b.len() != big_d * (d + 1) {
            return Err(Error::Schema(format!("basis.f32 holds {} values, expected {}", b.len(), big_d * (d + 1))));
        }
        let basis = EmbeddingBasis {
            word_frames: manifest.word_frames,
            joint_count: manifest.j,
            mean: b[..big_d].to_vec(),
            components: b[big_d..].chunks(big_d).map(<[f64]>::to_vec).collect(),
        };
        let transition: TransitionMatrix = serde_json::from_str(&std::fs::read_to_string(dir.join("transition.json"))?)?;
        if transition.k() != k {
            return Err(Error::Schema(format!("transition has {} rows, expected {k}", transition.k())));
        }
        transition.validate()?;
        let meta: Vec<MotifMeta> = serde_json::from_str(&std::fs::read_to_string(dir.join("motifs.json"))?)?;
        if meta.len() != k {
            return Err(Error::Schema(format!("{} motif records, expected {k}", meta.len())));
        }
        let mut skeleton = None;
        let mut motif_words = Vec::with_capacity(k);
        for m in meta {
            let mut clip = parse_bvh::<f64>(&std::fs::read_to_string(motif_path(dir, m.id))?)?;
            if let Some(f) = clip.frames.first_mut() {
                f.root_displacement = clip.root_origin;
            }
            clip.root_origin = Vec3::zero();
            skeleton.get_or_insert_with(|| clip.skeleton.clone());
            let mut w = MotionWord::new(clip.frames, m.contacts)?;
            w.span = m.span;
            w.source = m.source;
            w.origin = Vec3::from_slice(&m.origin);
            motif_words.push(w);
        }
        let skeleton = skeleton.ok_or_else(|| Error::Schema("bundle has no motifs".into()))?;
        if skeleton.joint_count() != manifest.j {
            return Err(Error::Schema("motif skeleton does not match manifest".into()));
        }
        let motif_vectors = motif_words.iter().map(|w| embed_word(w, &basis)).collect::<Result<_>>()?;
        let table = MotifTable {
            skeleton,
            fps: manifest.fps,
            basis,
            centroids: c.chunks(d).map(<[f64]>::to_vec).collect(),
            motif_words,
            motif_vectors,
            transition,
        };
        Ok((table, manifest))
    }
}

impl MotifLibrary {
    pub fn save(&self, dir: &Path, provenance: serde_json::Value) -> Result<()> {
        self.table.save(dir, provenance)?;
        let file = LibraryFile {
            streams: self.streams.clone(),
            genres: self.dance_genres.clone(),
            templates: self.templates.clone(),
            overall: self.overall.clone(),
        };
        std::fs::write(dir.join("library.json"), serde_json::to_string(&file)?)?;
        Ok(())
    }

    /// Reloads a saved library; the corpus words are re-segmented from
    /// `entries`, which must be the corpus the bundle was built from.
    pub fn load(dir: &Path, entries: &[CorpusEntry]) -> Result<(Self, BundleManifest)> {
        let (table, manifest) = MotifTable::load(dir)?;
        let file: LibraryFile = serde_json::from_str(&std::fs::read_to_string(dir.join("library.json"))?)?;
        let (words, per_dance) = corpus_words(entries)?;
        let stream_lens: Vec<usize> = file.streams.iter().map(Vec::len).collect();
        if stream_lens != per_dance {
            return Err(Error::Schema("corpus does not match the bundle's motif streams".into()));
        }
        let assignments: Vec<usize> = file.streams.iter().flatten().copied().collect();
        if let Some(&bad) = assignments.iter().find(|&&a| a >= table.k()) {
            return Err(Error::MotifOutOfRange { id: bad, k: table.k() });
        }
        let lib = MotifLibrary {
            table,
            words,
            assignments,
            streams: file.streams,
            dance_genres: file.genres,
            templates: file.templates,
            overall: file.overall,
        };
        Ok((lib, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::{build_library, ClusterConfig};
    use crate::synthetic::{synthetic_corpus, SyntheticCorpusConfig};

    #[test]
    fn roundtrip() {
        let cfg = SyntheticCorpusConfig { prototypes: 4, dances: 2, beats_per_dance: (15, 20), ..Default::default() };
        let entries = synthetic_corpus(&cfg, 2).entries();
        let lib = build_library(&entries, &ClusterConfig { k: 4, dim: 10, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        lib.save(dir.path(), serde_json::json!({"seed": 0})).unwrap();
        let (back, manifest) = MotifLibrary::load(dir.path(), &entries).unwrap();
        assert_eq!(manifest.k, 4);
        assert_eq!(back.streams, lib.streams);
        assert_eq!(back.templates, lib.templates);
        assert_eq!(back.table.transition, lib.table.transition);
        for (a, b) in back.table.centroids.iter().flatten().zip(lib.table.centroids.iter().flatten()) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in back.table.motif_words.iter().zip(&lib.table.motif_words) {
            assert_eq!(a.len(), b.len());
            assert_eq!(a.contacts, b.contacts);
            assert!((a.total_displacement() - b.total_displacement()).norm() < 1e-4);
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                for (qa, qb) in fa.rotations.iter().zip(&fb.rotations) {
                    assert!(crate::quat::quat_log_distance_sq(*qa, *qb).unwrap() < 1e-12);
                }
            }
        }
        for (i, w) in back.table.motif_words.iter().enumerate() {
            assert_eq!(back.table.assign_motif(w).unwrap(), i);
        }
    }
}
