//! Cluster, synthesize and train on top of the corpus store and bundle.

use std::path::Path;

use choreo_core::audio::{synth_beat_grid, BeatGrid, SPECTRAL_DIM};
use choreo_core::choreography::MotifConstraint;
use choreo_core::motif::{build_library, timescale_word, BundleManifest, MotifLibrary, MotionWord};
use choreo_core::rng;
use choreo_core::synthesis::{
    apply_style, finish_clip, plan_motifs, style_params_from_spectral, synthesize_graph, GraphOptions, MotifPlan, Sidecar,
    StyleMapper, StyleParams, StyleSource, SynthesisOutput, SynthesisPlan, TimelineEntry,
};
use choreo_core::{Clip, Pose};
use choreo_neural::{rollout, train_with, Frame, LossBreakdown, PoseNet, TrainData, TrainOptions, TrainReport, TrainSequence};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ProjectConfig, StyleMode};
use crate::error::{Result, ResultExt, ServiceError};
use crate::store::CorpusStore;

/// Files hashed into the bundle fingerprint, in order.
const BUNDLE_FILES: [&str; 6] = ["manifest.json", "centroids.f32", "basis.f32", "transition.json", "motifs.json", "library.json"];

/// Longest synthesis accepted, in frames.
pub const MAX_SYNTH_FRAMES: usize = 30 * 60 * 10;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds the motif library from the store and writes it to `dir`.
pub fn cluster(store: &CorpusStore, cfg: &ProjectConfig, seed: u64, dir: &Path) -> Result<MotifLibrary> {
    if store.entries.is_empty() {
        return Err(ServiceError::BadRequest("corpus store is empty".into()));
    }
    let cc = cfg.cluster_config(seed);
    let lib = build_library(&store.entries, &cc)?;
    lib.save(dir, serde_json::json!({ "motif": cfg.motif, "seed": seed, "corpus": store.provenance }))?;
    Ok(lib)
}

/// A loaded bundle together with the corpus it was built from.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub library: MotifLibrary,
    pub manifest: BundleManifest,
    pub store: CorpusStore,
    /// SHA-256 over the bundle files.
    pub fingerprint: String,
}

impl Bundle {
    pub fn load(dir: &Path, store: CorpusStore) -> Result<Self> {
        let (library, manifest) =
            MotifLibrary::load(dir, &store.entries).context(|| format!("bundle {}", dir.display()))?;
        let mut h = Sha256::new();
        for f in BUNDLE_FILES {
            let bytes = std::fs::read(dir.join(f)).context(|| format!("bundle file {f}"))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(Self { library, manifest, store, fingerprint: hex::encode(h.finalize()) })
    }

    pub fn from_config(cfg: &ProjectConfig) -> Result<Self> {
        Self::load(&cfg.bundle_dir(), CorpusStore::load(&cfg.corpus_path())?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Graph,
    Lstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleRequest {
    None,
    Spectral,
    Preset(StyleParams),
}

/// Body of `POST /api/synthesize`; the CLI builds the same request. Beats
/// come from `beats` (frame indices) or from `bpm` plus `duration` seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beats: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constraints: Vec<MotifConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<StyleRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
}

impl SynthRequest {
    /// Fills config defaults so that equivalent requests hash alike.
    pub fn normalized(&self, cfg: &ProjectConfig) -> Self {
        let mut r = self.clone();
        r.style.get_or_insert(match cfg.synthesis.style {
            StyleMode::None => StyleRequest::None,
            StyleMode::Spectral => StyleRequest::Spectral,
        });
        r.beta.get_or_insert(cfg.synthesis.beta);
        r.constraints.sort_by_key(|c| (c.beat, c.motif));
        r
    }

    /// Beat grid for requests without an explicit grid file: surrogate
    /// rhythmic rows and seeded spectral rows.
    pub fn beat_grid(&self, fps: f64) -> Result<BeatGrid> {
        let bad = |m: String| Err(ServiceError::BadRequest(m));
        match (&self.beats, self.bpm, self.duration) {
            (Some(beats), None, None) => {
                if beats.len() < 2 {
                    return bad("at least two beats are required".into());
                }
                if beats.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("beats must be strictly increasing".into());
                }
                let frames = beats[beats.len() - 1] + 1;
                if frames > MAX_SYNTH_FRAMES {
                    return bad(format!("beats span {frames} frames, limit is {MAX_SYNTH_FRAMES}"));
                }
                let rhythmic = BeatGrid::surrogate_rhythmic(beats, frames);
                let mut r = rng::derived(self.seed, 7);
                let spectral = (0..beats.len() - 1).map(|_| std::array::from_fn::<f64, SPECTRAL_DIM, _>(|_| r.random())).collect();
                Ok(BeatGrid::new(fps, beats.clone(), rhythmic, spectral)?)
            }
            (None, Some(bpm), Some(duration)) => {
                if !(duration > 0.0 && duration.is_finite()) {
                    return bad(format!("duration must be positive, got {duration}"));
                }
                let frames = (duration * fps).round() as usize + 1;
                if frames > MAX_SYNTH_FRAMES {
                    return bad(format!("duration of {frames} frames exceeds the limit of {MAX_SYNTH_FRAMES}"));
                }
                let grid = synth_beat_grid(bpm, fps, frames, rng::derived(self.seed, 7).random())
                    .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
                if grid.beat_frames.len() < 2 {
                    return bad("bpm and duration give fewer than two beats".into());
                }
                Ok(grid)
            }
            _ => bad("give either `beats` or both `bpm` and `duration`".into()),
        }
    }
}

/// A synthesized clip with everything needed to serve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub id: String,
    pub request: SynthRequest,
    pub clip: Clip,
    pub sidecar: Sidecar,
}

impl ClipRecord {
    pub fn bvh(&self) -> String {
        choreo_core::io::write_bvh(&self.clip)
    }

    pub fn motifs(&self) -> Vec<usize> {
        self.sidecar.motif_timeline.iter().map(|e| e.motif).collect()
    }
}

/// Content hash of everything that determines the output.
pub fn clip_id(bundle: &Bundle, cfg: &ProjectConfig, request: &SynthRequest, grid: &BeatGrid, net: Option<&str>) -> String {
    let key = serde_json::json!({
        "bundle": bundle.fingerprint,
        "synthesis": cfg.synthesis,
        "motion": cfg.motion,
        "request": request,
        "grid": sha256_hex(grid.to_json().as_bytes()),
        "net": net,
    });
    sha256_hex(key.to_string().as_bytes())
}

/// Loaded LSTM weights and their fingerprint.
#[derive(Debug, Clone)]
pub struct LoadedNet {
    pub net: PoseNet,
    pub fingerprint: String,
}

impl LoadedNet {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).context(|| format!("checkpoint {}", path.display()))?;
        let net = choreo_neural::checkpoint::from_bytes(&bytes).context(|| format!("checkpoint {}", path.display()))?;
        Ok(Self { net, fingerprint: sha256_hex(&bytes) })
    }
}

fn style_source(req: &StyleRequest, cfg: &ProjectConfig) -> StyleSource {
    match req {
        StyleRequest::None => StyleSource::None,
        StyleRequest::Spectral => StyleSource::Spectral { mapper_seed: cfg.synthesis.mapper_seed },
        StyleRequest::Preset(p) => StyleSource::Preset(p.clone()),
    }
}

/// Runs one synthesis request against `grid` with the selected backend.
pub fn synthesize(
    bundle: &Bundle,
    cfg: &ProjectConfig,
    request: &SynthRequest,
    grid: BeatGrid,
    net: Option<&LoadedNet>,
) -> Result<ClipRecord> {
    let request = request.normalized(cfg);
    if let Some(g) = &request.genre {
        if !bundle.library.templates.contains_key(g) {
            return Err(ServiceError::BadRequest(format!("unknown genre `{g}`")));
        }
    }
    let beta = request.beta.unwrap_or(cfg.synthesis.beta);
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(ServiceError::BadRequest(format!("beta must be finite and non-negative, got {beta}")));
    }
    let plan = SynthesisPlan {
        beats: grid,
        motifs: MotifPlan::Choreography {
            constraints: request.constraints.clone(),
            options: Default::default(),
            genre: request.genre.clone(),
        },
        seed: request.seed,
        style: style_source(request.style.as_ref().unwrap_or(&StyleRequest::None), cfg),
        beta,
    };
    let (out, net_fp) = match request.backend {
        Backend::Graph => (synthesize_graph(&plan, &bundle.library, &cfg.graph_options())?, None),
        Backend::Lstm => {
            let n = net.ok_or_else(|| {
                ServiceError::BadRequest("the lstm backend needs a checkpoint; run `choreo train` first".into())
            })?;
            let out = synthesize_lstm(&plan, &bundle.library, &cfg.graph_options(), &n.net, cfg.synthesis.warmup_frames)?;
            (out, Some(n.fingerprint.as_str()))
        }
    };
    let id = clip_id(bundle, cfg, &request, &plan.beats, net_fp);
    let provenance = serde_json::json!({
        "id": id,
        "seed": request.seed,
        "backend": request.backend,
        "bundle": bundle.fingerprint,
        "checkpoint": net_fp,
        "synthesis": cfg.synthesis,
        "request": request,
    });
    let sidecar = out.sidecar(&plan.beats, provenance);
    Ok(ClipRecord { id, request, clip: out.clip, sidecar })
}

fn check_net(net: &PoseNet, library: &MotifLibrary) -> Result<()> {
    if !net.skeleton.is_compatible(&library.table.skeleton, 1e-6) {
        return Err(ServiceError::BadRequest("checkpoint skeleton does not match the bundle".into()));
    }
    if net.dims.motif_dim != library.table.dim() {
        return Err(ServiceError::BadRequest(format!(
            "checkpoint expects {}-dimensional motifs, bundle has {}",
            net.dims.motif_dim,
            library.table.dim()
        )));
    }
    Ok(())
}

/// LSTM backend: the sampled motif vectors condition the network, which is
/// warmed up on the opening frames of the first motif and then generates
/// every remaining frame from its own output. Style and foot cleanup follow
/// as in the graph backend.
pub fn synthesize_lstm(
    plan: &SynthesisPlan,
    library: &MotifLibrary,
    options: &GraphOptions,
    net: &PoseNet,
    warmup: usize,
) -> Result<SynthesisOutput> {
    check_net(net, library)?;
    plan.beats.validate()?;
    let beats = &plan.beats.beat_frames;
    if beats.len() < 2 {
        return Err(ServiceError::BadRequest("synthesis needs at least two beats".into()));
    }
    let (motifs, pinned, target) = plan_motifs(plan, library)?;
    let table = &library.table;
    let b0 = beats[0];
    let total = beats[beats.len() - 1] - b0;
    let local: Vec<usize> = beats.iter().map(|b| b - b0).collect();
    let grid = BeatGrid::new(
        plan.beats.fps,
        local.clone(),
        plan.beats.rhythmic[b0..=beats[beats.len() - 1]].to_vec(),
        plan.beats.spectral.clone(),
    )?;
    let vectors: Vec<Vec<f64>> = motifs.iter().map(|&m| table.motif_vectors[m].clone()).collect();
    let first = timescale_word(&table.motif_words[motifs[0]], local[1])?;
    let warm = warmup.clamp(1, first.len());
    let initial: Vec<Frame> = first.frames[..warm]
        .iter()
        .zip(&first.contacts)
        .map(|(p, c)| Frame { pose: p.to_vec(), contacts: [c[0] as f64, c[1] as f64] })
        .collect();
    let generated = rollout(net, &initial, &grid, &vectors, total.saturating_sub(warm))?;
    let mut frames: Vec<Pose> = first.frames[..warm].to_vec();
    let mut contacts: Vec<[u8; 2]> = first.contacts[..warm].to_vec();
    for f in &generated {
        frames.push(Pose::from_slice(&f.pose)?);
        contacts.push([(f.contacts[0] >= 0.5) as u8, (f.contacts[1] >= 0.5) as u8]);
    }
    frames.truncate(total);
    contacts.truncate(total);

    let mut flags = Vec::new();
    let mapper = match &plan.style {
        StyleSource::Spectral { mapper_seed } => Some(StyleMapper::for_joints(table.skeleton.joint_count(), *mapper_seed)),
        _ => None,
    };
    let mut timeline = Vec::with_capacity(motifs.len());
    for (k, &m) in motifs.iter().enumerate() {
        let (s, e) = (local[k], local[k + 1]);
        let params = match (&plan.style, &mapper) {
            (StyleSource::Preset(p), _) => Some(StyleParams { beta: plan.beta, ..p.clone() }),
            (StyleSource::Spectral { .. }, Some(map)) => Some(style_params_from_spectral(&plan.beats.spectral[k], map, plan.beta)?),
            _ => None,
        };
        if let Some(p) = params {
            if e - s >= 3 {
                let word = MotionWord::new(frames[s..e].to_vec(), contacts[s..e].to_vec())?;
                let styled = apply_style(&word, &p)?;
                frames[s..e].clone_from_slice(&styled.frames);
            } else {
                flags.push(format!("style skipped on beat {k}: {}-frame word", e - s));
            }
        }
        timeline.push(TimelineEntry { beat: k, motif: m, start: s, end: e, source: None, constrained: pinned[k] });
    }
    let mut clip = Clip::new(table.skeleton.clone(), frames, plan.beats.fps);
    clip.root_origin = first.origin;
    let (clip, labels) = finish_clip(clip, contacts, options, &mut flags)?;
    let signature_trace = choreo_core::choreography::convergence_trace(&motifs, &target)?;
    Ok(SynthesisOutput { clip, contacts: labels, timeline, signature_trace, flags })
}

/// Training sequences for every corpus dance long enough for one window.
pub fn training_sequences(bundle: &Bundle, window: usize) -> Result<Vec<TrainSequence>> {
    let mut seqs = Vec::new();
    for e in &bundle.store.entries {
        if e.clip.len() < window {
            continue;
        }
        seqs.push(TrainSequence::from_entry(e, &bundle.library.table).context(|| format!("dance {}", e.name))?);
    }
    if seqs.is_empty() {
        return Err(ServiceError::BadRequest(format!("no dance has the {window} frames one training window needs")));
    }
    Ok(seqs)
}

/// Trains a fresh network on the bundle's corpus.
pub fn train_net(
    bundle: &Bundle,
    cfg: &ProjectConfig,
    seed: u64,
    iterations: usize,
    mut progress: impl FnMut(usize, &LossBreakdown),
) -> Result<(PoseNet, TrainReport)> {
    let seqs = training_sequences(bundle, cfg.neural.window)?;
    let table = &bundle.library.table;
    let data = TrainData { sequences: &seqs, basis: Some(&table.basis) };
    let mut net = PoseNet::new(cfg.neural.clone(), table.skeleton.clone(), table.dim(), seed)?;
    let report = train_with(&mut net, &data, &TrainOptions { iterations, seed }, |it, _, loss| {
        progress(it, loss);
        std::ops::ControlFlow::Continue(())
    })?;
    Ok((net, report))
}
