use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::BeatGrid;
use crate::error::{Error, Result};
use crate::Clip;

use super::FootContactLabels;

/// One manifest line: where a dance and its beat annotation live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub bvh: PathBuf,
    pub beats: PathBuf,
    pub genre: String,
}

/// JSON array of [`ManifestEntry`]. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut m: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            if e.bvh.is_relative() {
                e.bvh = base.join(&e.bvh);
            }
            if e.beats.is_relative() {
                e.beats = base.join(&e.beats);
            }
        }
        Ok(m)
    }
}

/// An ingested dance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub genre: String,
    pub clip: Clip,
    pub contacts: FootContactLabels,
    pub beats: BeatGrid,
}

impl CorpusEntry {
    pub fn new(name: String, genre: String, clip: Clip, contacts: FootContactLabels, beats: BeatGrid) -> Result<Self> {
        if contacts.len() != clip.len() {
            return Err(Error::Schema(format!(
                "{} contact labels for {} frames",
                contacts.len(),
                clip.len()
            )));
        }
        if let Some(&last) = beats.beat_frames.last() {
            if last >= clip.len() {
                return Err(Error::Schema(format!(
                    "beat frame {last} beyond clip of {} frames",
                    clip.len()
                )));
            }
        }
        Ok(Self { name, genre, clip, contacts, beats })
    }
}
