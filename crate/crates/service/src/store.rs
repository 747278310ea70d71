//! Corpus store: the ingested dances as one JSON file.

use std::path::{Path, PathBuf};

use choreo_core::audio::BeatGrid;
use choreo_core::io::{detect_foot_contacts, parse_bvh, resample, write_bvh, CorpusEntry, CorpusManifest, FootContactLabels, ManifestEntry};
use choreo_core::motion::antipodal_correct;
use choreo_core::synthetic::{synthetic_corpus, SyntheticCorpusConfig};
use serde::{Deserialize, Serialize};

use crate::config::ProjectConfig;
use crate::error::{Result, ResultExt, ServiceError};

pub const STORE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStore {
    pub format: u32,
    /// Config section and seed that produced the store.
    pub provenance: serde_json::Value,
    /// Non-fatal ingest notes, one per affected dance.
    #[serde(default)]
    pub warnings: Vec<String>,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusStore {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).context(|| format!("corpus store {}", path.display()))?;
        let store: Self = serde_json::from_slice(&bytes).context(|| format!("corpus store {}", path.display()))?;
        if store.format != STORE_FORMAT {
            return Err(ServiceError::Config(format!("corpus store format {} not supported", store.format)));
        }
        Ok(store)
    }
}

/// Truncates `grid` to `frames` frames, dropping beats (and their spectral
/// rows) that fall outside.
fn fit_grid(grid: BeatGrid, frames: usize) -> Result<BeatGrid> {
    if grid.frame_count() <= frames {
        return Ok(grid);
    }
    let beats: Vec<usize> = grid.beat_frames.iter().copied().filter(|&b| b < frames).collect();
    let intervals = beats.len().saturating_sub(1);
    Ok(BeatGrid::new(grid.fps, beats, grid.rhythmic[..frames].to_vec(), grid.spectral[..intervals].to_vec())?)
}

fn ingest_one(e: &ManifestEntry, cfg: &ProjectConfig, warnings: &mut Vec<String>) -> Result<CorpusEntry> {
    let name = e.bvh.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let text = std::fs::read_to_string(&e.bvh).context(|| e.bvh.display().to_string())?;
    let mut clip = parse_bvh::<f64>(&text).context(|| e.bvh.display().to_string())?;
    if cfg.motion.joints > 0 && clip.skeleton.joint_count() != cfg.motion.joints {
        return Err(ServiceError::BadRequest(format!(
            "{}: {} joints, config requires {}",
            e.bvh.display(),
            clip.skeleton.joint_count(),
            cfg.motion.joints
        )));
    }
    clip = antipodal_correct(&clip)?;
    if (clip.fps - cfg.motion.fps).abs() > 1e-6 {
        clip = resample(&clip, cfg.motion.fps).context(|| e.bvh.display().to_string())?;
    }
    let grid = BeatGrid::load(&e.beats).context(|| e.beats.display().to_string())?;
    if (grid.fps - cfg.motion.fps).abs() > 1e-6 {
        return Err(ServiceError::BadRequest(format!(
            "{}: beat grid at {} fps, project runs at {} fps",
            e.beats.display(),
            grid.fps,
            cfg.motion.fps
        )));
    }
    let grid = fit_grid(grid, clip.len()).context(|| e.beats.display().to_string())?;
    if grid.frame_count() < clip.len() {
        clip = clip.slice(0, grid.frame_count());
    }
    let contacts = match detect_foot_contacts(&clip, &cfg.contact_config(&clip.skeleton)) {
        Ok(c) => c,
        Err(err) => {
            warnings.push(format!("{name}: no foot contacts ({err})"));
            FootContactLabels::zeros(clip.len())
        }
    };
    Ok(CorpusEntry::new(name, e.genre.clone(), clip, contacts, grid).context(|| e.bvh.display().to_string())?)
}

/// Parses every BVH and beat file of the manifest, fixes quaternion
/// hemispheres, resamples to the project frame rate and labels foot contacts.
pub fn ingest(manifest: &CorpusManifest, cfg: &ProjectConfig) -> Result<CorpusStore> {
    let mut warnings = Vec::new();
    let entries = manifest.entries.iter().map(|e| ingest_one(e, cfg, &mut warnings)).collect::<Result<Vec<_>>>()?;
    Ok(CorpusStore {
        format: STORE_FORMAT,
        provenance: serde_json::json!({ "motion": cfg.motion, "seed": cfg.seed }),
        warnings,
        entries,
    })
}

pub fn ingest_manifest_file(path: &Path, cfg: &ProjectConfig) -> Result<CorpusStore> {
    let manifest = CorpusManifest::load(path).context(|| format!("manifest {}", path.display()))?;
    ingest(&manifest, cfg)
}

/// Writes a seeded synthetic corpus as BVH and beat files plus a manifest
/// (`manifest.json`) inside `dir`. Returns the manifest path.
pub fn write_synthetic_corpus(dir: &Path, cfg: &SyntheticCorpusConfig, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let corpus = synthetic_corpus(cfg, seed);
    let mut manifest = CorpusManifest::default();
    for d in &corpus.dances {
        let e = &d.entry;
        let bvh = format!("{}.bvh", e.name);
        let beats = format!("{}.beats.json", e.name);
        std::fs::write(dir.join(&bvh), write_bvh(&e.clip))?;
        e.beats.save(&dir.join(&beats))?;
        manifest.entries.push(ManifestEntry { bvh: bvh.into(), beats: beats.into(), genre: e.genre.clone() });
    }
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}
