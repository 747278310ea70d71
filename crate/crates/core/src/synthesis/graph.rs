use serde::{Deserialize, Serialize};

use crate::audio::BeatGrid;
use crate::choreography::{constraint_slots, convergence_trace, run_choreography, ChoreographyOptions, MotifConstraint};
use crate::error::{Error, Result};
use crate::io::{detect_foot_contacts, ContactConfig, FootContactLabels};
use crate::motif::{timescale_word, MotifLibrary, MotionWord, Signature, WordSource};
use crate::motion::MotionClip;
use crate::rng;
use crate::Clip;

use super::ik::{clean_foot_sliding, IkConfig};
use super::smooth::smooth_root_orientation;
use super::stitch::{select_word, stitch};
use super::style::{apply_style, style_params_from_spectral, StyleMapper, StyleParams};

/// Where the per-beat motifs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifPlan {
    /// One motif per beat interval, verbatim.
    Fixed(Vec<usize>),
    /// Sampled toward a template signature, honoring pins.
    Choreography {
        #[serde(default)]
        constraints: Vec<MotifConstraint>,
        #[serde(default)]
        options: ChoreographyOptions,
        /// Genre template; the all-dance template when absent.
        #[serde(default)]
        genre: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleSource {
    None,
    /// Parameters from each beat's spectral row through a seeded mapper.
    Spectral { mapper_seed: u64 },
    /// The same parameters on every word.
    Preset(StyleParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisPlan {
    pub beats: BeatGrid,
    pub motifs: MotifPlan,
    pub seed: u64,
    pub style: StyleSource,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub blend_frames: usize,
    /// Root orientation smoothing window; 0 or 1 disables it.
    pub smooth_window: usize,
    pub clean_feet: bool,
    pub ik: IkConfig,
    pub contact_height: f64,
    pub contact_speed: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            blend_frames: 3,
            smooth_window: 0,
            clean_feet: true,
            ik: IkConfig::default(),
            contact_height: 3.0,
            contact_speed: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub beat: usize,
    pub motif: usize,
    /// Output frames `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub source: Option<WordSource>,
    pub constrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutput {
    pub clip: Clip,
    pub contacts: FootContactLabels,
    pub timeline: Vec<TimelineEntry>,
    pub signature_trace: Vec<f64>,
    pub flags: Vec<String>,
}

/// Motif ids per beat interval and which of them were pinned.
pub fn plan_motifs(plan: &SynthesisPlan, library: &MotifLibrary) -> Result<(Vec<usize>, Vec<bool>, Signature)> {
    let n = plan.beats.interval_count();
    let k = library.table.k();
    match &plan.motifs {
        MotifPlan::Fixed(ids) => {
            if ids.len() != n {
                return Err(Error::InvalidArgument(format!("{} motifs for {n} beat intervals", ids.len())));
            }
            if let Some(&bad) = ids.iter().find(|&&m| m >= k) {
                return Err(Error::MotifOutOfRange { id: bad, k });
            }
            Ok((ids.clone(), vec![true; n], library.overall.clone()))
        }
        MotifPlan::Choreography { constraints, options, genre } => {
            let target = library.template(genre.as_deref())?.clone();
            let pinned = constraint_slots(constraints, n, k)?.iter().map(Option::is_some).collect();
            let seed = rng::derived(plan.seed, 1).get_seed_u64();
            let run = run_choreography(&library.table.transition, &target, n, seed, constraints, *options)?;
            Ok((run.motifs, pinned, target))
        }
    }
}

trait SeedU64 {
    fn get_seed_u64(&mut self) -> u64;
}

impl SeedU64 for rng::Rng {
    fn get_seed_u64(&mut self) -> u64 {
        use rand::Rng as _;
        self.random()
    }
}

/// Motion-graph synthesis: per beat interval pick the motif, choose the
/// cluster member joining the previous word best, time-scale it to the
/// interval, optionally style it, and blend it onto the previous word. Feet
/// are then re-labelled and optionally pinned.
pub fn synthesize_graph(plan: &SynthesisPlan, library: &MotifLibrary, options: &GraphOptions) -> Result<SynthesisOutput> {
    plan.beats.validate()?;
    let beats = &plan.beats.beat_frames;
    if beats.len() < 2 {
        return Err(Error::TooFew("synthesis needs at least two beats".into()));
    }
    if let Some(w) = beats.windows(2).find(|w| w[1] - w[0] < 2) {
        return Err(Error::InvalidArgument(format!("beat gap {}..{} is shorter than 2 frames", w[0], w[1])));
    }
    let (motifs, pinned, target) = plan_motifs(plan, library)?;
    let joints = library.table.skeleton.joint_count();
    let mapper = match &plan.style {
        StyleSource::Spectral { mapper_seed } => Some(StyleMapper::for_joints(joints, *mapper_seed)),
        _ => None,
    };

    let mut frames = Vec::with_capacity(beats[beats.len() - 1] - beats[0]);
    let mut contacts = Vec::new();
    let mut timeline = Vec::with_capacity(motifs.len());
    let mut prev: Option<MotionWord> = None;
    let mut origin = None;
    let mut flags = Vec::new();
    for (k, &m) in motifs.iter().enumerate() {
        let gap = beats[k + 1] - beats[k];
        let chosen: MotionWord = match &prev {
            None => library.table.motif_words[m].clone(),
            Some(p) => {
                let members = library.members(m);
                if members.is_empty() {
                    library.table.motif_words[m].clone()
                } else {
                    let cands: Vec<&MotionWord> = members.iter().map(|&i| &library.words[i]).collect();
                    cands[select_word(&cands, Some(p))?].clone()
                }
            }
        };
        origin.get_or_insert(chosen.origin);
        let source = chosen.source;
        let mut word = timescale_word(&chosen, gap)?;
        let params = match (&plan.style, &mapper) {
            (StyleSource::Preset(p), _) => Some(StyleParams { beta: plan.beta, ..p.clone() }),
            (StyleSource::Spectral { .. }, Some(map)) => Some(style_params_from_spectral(&plan.beats.spectral[k], map, plan.beta)?),
            _ => None,
        };
        if let Some(p) = params {
            if word.len() >= 3 {
                word = apply_style(&word, &p)?;
            } else {
                flags.push(format!("style skipped on beat {k}: {gap}-frame word"));
            }
        }
        let word = stitch(prev.as_ref().and_then(|p| p.frames.last()), &word, gap, options.blend_frames)?;
        let start = frames.len();
        frames.extend(word.frames.iter().cloned());
        contacts.extend(word.contacts.iter().copied());
        timeline.push(TimelineEntry { beat: k, motif: m, start, end: frames.len(), source, constrained: pinned[k] });
        prev = Some(word);
    }

    let mut clip = MotionClip::new(library.table.skeleton.clone(), frames, plan.beats.fps);
    clip.root_origin = origin.unwrap_or_default();
    let (clip, labels) = finish_clip(clip, contacts, options, &mut flags)?;
    let signature_trace = convergence_trace(&motifs, &target)?;
    Ok(SynthesisOutput { clip, contacts: labels, timeline, signature_trace, flags })
}

/// Shared post-processing: optional root smoothing, contact re-labelling
/// (falling back to `carried` labels when the skeleton has no feet) and
/// optional foot-sliding cleanup. Problems are reported through `flags`.
pub fn finish_clip(
    mut clip: Clip,
    carried: Vec<[u8; 2]>,
    options: &GraphOptions,
    flags: &mut Vec<String>,
) -> Result<(Clip, FootContactLabels)> {
    if options.smooth_window > 1 {
        clip = smooth_root_orientation(&clip, options.smooth_window)?;
    }
    let mut cfg = ContactConfig::for_skeleton(&clip.skeleton);
    cfg.height_threshold = options.contact_height;
    cfg.speed_threshold = options.contact_speed;
    let labels = match detect_foot_contacts(&clip, &cfg) {
        Ok(l) => l,
        Err(_) => {
            flags.push("contacts carried from source words (no feet found)".into());
            FootContactLabels::new(carried)?
        }
    };
    if options.clean_feet {
        match clean_foot_sliding(&clip, &labels, &cfg, &options.ik) {
            Ok(res) => {
                if !res.clamped.is_empty() {
                    flags.push(format!("foot target out of reach on {} frames", res.clamped.len()));
                }
                clip = res.clip;
            }
            Err(e) => flags.push(format!("foot cleanup skipped: {e}")),
        }
    }
    Ok((clip, labels))
}

/// JSON written next to a synthesized BVH.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub fps: f64,
    pub frame_count: usize,
    /// Beats relative to the first output frame.
    pub beat_frames: Vec<usize>,
    pub motif_timeline: Vec<TimelineEntry>,
    pub signature_trace: Vec<f64>,
    pub contact_spans: ContactSpans,
    pub flags: Vec<String>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSpans {
    pub left: Vec<(usize, usize)>,
    pub right: Vec<(usize, usize)>,
}

impl SynthesisOutput {
    pub fn sidecar(&self, beats: &BeatGrid, provenance: serde_json::Value) -> Sidecar {
        let first = beats.beat_frames.first().copied().unwrap_or(0);
        Sidecar {
            fps: self.clip.fps,
            frame_count: self.clip.len(),
            beat_frames: beats.beat_frames.iter().map(|b| b - first).collect(),
            motif_timeline: self.timeline.clone(),
            signature_trace: self.signature_trace.clone(),
            contact_spans: ContactSpans { left: self.contacts.spans(0), right: self.contacts.spans(1) },
            flags: self.flags.clone(),
            provenance,
        }
    }

    pub fn motifs(&self) -> Vec<usize> {
        self.timeline.iter().map(|e| e.motif).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth_beat_grid;
    use crate::motif::{build_library, ClusterConfig};
    use crate::synthetic::{synthetic_corpus, SyntheticCorpusConfig};

    fn library() -> MotifLibrary {
        let cfg = SyntheticCorpusConfig { prototypes: 5, dances: 4, beats_per_dance: (20, 30), ..Default::default() };
        build_library(&synthetic_corpus(&cfg, 21).entries(), &ClusterConfig { k: 5, dim: 12, ..Default::default() }).unwrap()
    }

    fn plan(motifs: MotifPlan) -> SynthesisPlan {
        SynthesisPlan {
            beats: synth_beat_grid(120.0, 30.0, 241, 3).unwrap(),
            motifs,
            seed: 17,
            style: StyleSource::Spectral { mapper_seed: 0 },
            beta: 0.5,
        }
    }

    #[test]
    fn pinned_single_motif_uses_its_cluster() {
        let lib = library();
        let p = plan(MotifPlan::Fixed(vec![2; 16]));
        let out = synthesize_graph(&p, &lib, &GraphOptions::default()).unwrap();
        assert_eq!(out.motifs(), vec![2; 16]);
        for e in &out.timeline[1..] {
            let src = e.source.unwrap();
            let idx = lib.words.iter().position(|w| w.source == Some(src)).unwrap();
            assert_eq!(lib.assignments[idx], 2);
        }
        assert_eq!(out.clip.len(), 240);
        out.clip.validate().unwrap();
    }

    #[test]
    fn deterministic_and_counted() {
        let lib = library();
        let p = plan(MotifPlan::Choreography {
            constraints: vec![MotifConstraint { beat: 3, motif: 1 }],
            options: Default::default(),
            genre: None,
        });
        let a = synthesize_graph(&p, &lib, &GraphOptions::default()).unwrap();
        let b = synthesize_graph(&p, &lib, &GraphOptions::default()).unwrap();
        assert_eq!(a.clip, b.clip);
        assert_eq!(a.timeline[3].motif, 1);
        assert!(a.timeline[3].constrained && !a.timeline[2].constrained);
        let beats = &p.beats.beat_frames;
        assert_eq!(a.clip.len(), beats.last().unwrap() - beats[0]);
        assert_eq!(a.signature_trace.len(), 16);
        let side = a.sidecar(&p.beats, serde_json::Value::Null);
        assert_eq!(side.frame_count, 240);
    }

    #[test]
    fn bad_plans_rejected() {
        let lib = library();
        assert!(synthesize_graph(&plan(MotifPlan::Fixed(vec![0; 3])), &lib, &GraphOptions::default()).is_err());
        assert!(synthesize_graph(&plan(MotifPlan::Fixed(vec![9; 16])), &lib, &GraphOptions::default()).is_err());
    }
}
