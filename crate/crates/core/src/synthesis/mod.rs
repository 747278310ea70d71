//! Pose-level realization: motion-graph stitching of motif words, the
//! windowed per-channel style transform, foot-contact IK and root smoothing.

mod graph;
mod ik;
mod smooth;
mod stitch;
mod style;

pub use graph::{
    finish_clip, plan_motifs, synthesize_graph, ContactSpans, GraphOptions, MotifPlan, Sidecar, StyleSource, SynthesisOutput,
    SynthesisPlan, TimelineEntry,
};
pub use ik::{clean_foot_sliding, IkConfig, IkResult, LegChain};
pub use smooth::smooth_root_orientation;
pub use stitch::{junction_distance, select_word, stitch, JUNCTION_POSES};
pub use style::{apply_style, standardize, style_params_from_spectral, style_window, StyleMapper, StyleParams};
