//! Autoregressive generation.

use choreo_core::audio::BeatGrid;
use choreo_core::io::FootContactLabels;
use choreo_core::quat::Vec3;
use choreo_core::{Clip, Pose};

use crate::config::RHYTHMIC_DIM;
use crate::error::{NeuralError, Result};
use crate::loss::Frame;
use crate::net::PoseNet;

/// Motif vector in effect at frame `t`: the one of the beat interval holding
/// `t`, clamped to the first and last interval.
pub fn motif_index(beats: &[usize], intervals: usize, t: usize) -> usize {
    beats.partition_point(|&b| b <= t).saturating_sub(1).min(intervals.saturating_sub(1))
}

/// Feeds `initial` frames, then generates `steps` frames by feeding the
/// network its own output. Frame `initial.len() + s` is the `s`-th output.
/// Rhythmic features come from `grid`; `motifs[k]` conditions beat interval
/// `k`.
pub fn rollout(net: &PoseNet, initial: &[Frame], grid: &BeatGrid, motifs: &[Vec<f64>], steps: usize) -> Result<Vec<Frame>> {
    if steps == 0 {
        return Ok(Vec::new());
    }
    if initial.is_empty() {
        return Err(NeuralError::Data("rollout needs at least one initial frame".into()));
    }
    if motifs.is_empty() || motifs.iter().any(|m| m.len() != net.dims.motif_dim) {
        return Err(NeuralError::Dimension(format!("motif vectors must have {} values", net.dims.motif_dim)));
    }
    let last_input = initial.len() + steps - 1;
    if grid.frame_count() < last_input {
        return Err(NeuralError::Data(format!(
            "beat grid covers {} frames, rollout needs {last_input}",
            grid.frame_count()
        )));
    }
    let pd = net.dims.pose();
    if initial.iter().any(|f| f.pose.len() != pd) {
        return Err(NeuralError::Dimension("initial frame does not match the skeleton".into()));
    }
    let input = |t: usize, f: &Frame| {
        let mut x = Vec::with_capacity(net.dims.input());
        x.extend_from_slice(&grid.rhythmic[t][..RHYTHMIC_DIM]);
        x.extend_from_slice(&motifs[motif_index(&grid.beat_frames, motifs.len(), t)]);
        x.extend_from_slice(&f.pose);
        x.extend_from_slice(&f.contacts);
        x
    };
    let mut state = net.initial_state(1);
    let mut last = None;
    for (t, f) in initial.iter().enumerate() {
        let (out, next) = net.forward_step(&state, &input(t, f))?;
        state = next;
        last = Some(out);
    }
    let mut frames = Vec::with_capacity(steps);
    let mut t = initial.len();
    while frames.len() < steps {
        let out = last.take().expect("a step has run");
        let frame = Frame { pose: out.pose, contacts: out.contacts };
        if frames.len() + 1 < steps {
            let (o, next) = net.forward_step(&state, &input(t, &frame))?;
            state = next;
            last = Some(o);
        }
        frames.push(frame);
        t += 1;
    }
    Ok(frames)
}

/// Packs generated frames into a clip with thresholded contact labels.
pub fn frames_to_clip(net: &PoseNet, frames: &[Frame], fps: f64, origin: Vec3<f64>) -> Result<(Clip, FootContactLabels)> {
    let poses = frames.iter().map(|f| Pose::from_slice(&f.pose)).collect::<choreo_core::Result<Vec<_>>>()?;
    let mut clip = Clip::new(net.skeleton.clone(), poses, fps);
    clip.root_origin = origin;
    let labels = frames
        .iter()
        .map(|f| [(f.contacts[0] >= 0.5) as u8, (f.contacts[1] >= 0.5) as u8])
        .collect();
    Ok((clip, FootContactLabels::new(labels)?))
}
