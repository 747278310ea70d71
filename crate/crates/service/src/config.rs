//! Project configuration: a TOML file with one table per pipeline stage.
//! Unknown keys are rejected and every value is validated on load. Relative
//! paths resolve against the directory holding the file.

use std::path::{Path, PathBuf};

use choreo_core::io::ContactConfig;
use choreo_core::motif::ClusterConfig;
use choreo_core::synthesis::{GraphOptions, IkConfig};
use choreo_core::Skeleton;
use choreo_neural::NetConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CHOREO_CONFIG";
/// Looked up in the working directory when neither a flag nor the variable
/// names a file.
pub const DEFAULT_CONFIG_FILE: &str = "choreo.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub seed: u64,
    pub motion: MotionConfig,
    pub motif: MotifConfig,
    pub synthesis: SynthesisConfig,
    pub neural: NetConfig,
    pub training: TrainingConfig,
    pub paths: PathsConfig,
    pub server: ServerConfig,
    /// Directory relative paths resolve against; not read from the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub fps: f64,
    /// Required joint count; 0 accepts any skeleton.
    pub joints: usize,
    /// Foot contact thresholds in world units and world units per frame.
    pub contact_height: f64,
    pub contact_speed: f64,
    pub up_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotifConfig {
    pub k: usize,
    pub dim: usize,
    pub word_frames: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub auto_reduce: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleMode {
    None,
    #[default]
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub beta: f64,
    pub style: StyleMode,
    pub mapper_seed: u64,
    pub blend_frames: usize,
    pub smooth_window: usize,
    pub clean_feet: bool,
    pub ik_blend_frames: usize,
    /// Initial frames fed to the LSTM backend before it runs on its own.
    pub warmup_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub bundle: PathBuf,
    pub checkpoint: PathBuf,
    pub clips: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Synthesis jobs allowed to run at once.
    pub workers: usize,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            motion: MotionConfig::default(),
            motif: MotifConfig::default(),
            synthesis: SynthesisConfig::default(),
            neural: NetConfig::default(),
            training: TrainingConfig::default(),
            paths: PathsConfig::default(),
            server: ServerConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Default for MotionConfig {
    fn default() -> Self {
        let c = ContactConfig::default();
        Self {
            fps: choreo_core::DEFAULT_FPS,
            joints: 0,
            contact_height: c.height_threshold,
            contact_speed: c.speed_threshold,
            up_axis: c.up_axis,
        }
    }
}

impl Default for MotifConfig {
    fn default() -> Self {
        let c = ClusterConfig::default();
        Self {
            k: c.k,
            dim: c.dim,
            word_frames: c.word_frames,
            max_iters: c.max_iters,
            restarts: c.restarts,
            auto_reduce: c.auto_reduce,
        }
    }
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let g = GraphOptions::default();
        Self {
            beta: 0.5,
            style: StyleMode::Spectral,
            mapper_seed: 0,
            blend_frames: g.blend_frames,
            smooth_window: g.smooth_window,
            clean_feet: g.clean_feet,
            ik_blend_frames: g.ik.blend_frames,
            warmup_frames: 1,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { iterations: 2000 }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus: "corpus.json".into(),
            bundle: "bundle".into(),
            checkpoint: "posenet.bin".into(),
            clips: "clips".into(),
        }
    }
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080, workers: 2 }
    }
}

impl ProjectConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| e.context(path.display().to_string()))
    }

    /// The explicit file if given, else the one named by [`CONFIG_ENV`], else
    /// [`DEFAULT_CONFIG_FILE`] when present, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        if let Some(p) = std::env::var_os(CONFIG_ENV) {
            return Self::load(Path::new(&p));
        }
        let local = Path::new(DEFAULT_CONFIG_FILE);
        if local.is_file() {
            return Self::load(local);
        }
        Ok(Self::default())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ServiceError::Config(m));
        let m = &self.motion;
        if !(m.fps > 0.0 && m.fps.is_finite()) {
            return bad(format!("motion.fps must be positive, got {}", m.fps));
        }
        if !(m.contact_height >= 0.0 && m.contact_speed >= 0.0) || m.up_axis > 2 {
            return bad("motion contact thresholds must be non-negative and up_axis in 0..=2".into());
        }
        let c = &self.motif;
        if c.k == 0 || c.dim == 0 || c.max_iters == 0 || c.restarts == 0 {
            return bad("motif.k, dim, max_iters and restarts must be positive".into());
        }
        if c.word_frames < 2 {
            return bad("motif.word_frames must be at least 2".into());
        }
        let s = &self.synthesis;
        if !(s.beta >= 0.0 && s.beta.is_finite()) {
            return bad(format!("synthesis.beta must be finite and non-negative, got {}", s.beta));
        }
        if s.warmup_frames == 0 {
            return bad("synthesis.warmup_frames must be positive".into());
        }
        self.neural.validate().map_err(|e| ServiceError::Config(format!("neural: {e}")))?;
        if self.server.workers == 0 {
            return bad("server.workers must be positive".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.paths.corpus)
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.resolve(&self.paths.bundle)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.resolve(&self.paths.checkpoint)
    }

    pub fn clips_dir(&self) -> PathBuf {
        self.resolve(&self.paths.clips)
    }

    pub fn cluster_config(&self, seed: u64) -> ClusterConfig {
        let c = &self.motif;
        ClusterConfig {
            k: c.k,
            dim: c.dim,
            word_frames: c.word_frames,
            seed,
            max_iters: c.max_iters,
            restarts: c.restarts,
            auto_reduce: c.auto_reduce,
        }
    }

    pub fn contact_config(&self, skeleton: &Skeleton) -> ContactConfig {
        ContactConfig {
            height_threshold: self.motion.contact_height,
            speed_threshold: self.motion.contact_speed,
            up_axis: self.motion.up_axis,
            ..ContactConfig::for_skeleton(skeleton)
        }
    }

    pub fn graph_options(&self) -> GraphOptions {
        let s = &self.synthesis;
        GraphOptions {
            blend_frames: s.blend_frames,
            smooth_window: s.smooth_window,
            clean_feet: s.clean_feet,
            ik: IkConfig { blend_frames: s.ik_blend_frames },
            contact_height: self.motion.contact_height,
            contact_speed: self.motion.contact_speed,
        }
    }
}
