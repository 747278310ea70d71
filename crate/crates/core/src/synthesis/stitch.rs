use crate::error::{Error, Result};
use crate::motif::{timescale_word, MotionWord};
use crate::motion::pose_distance;
use crate::Pose;

/// Frames compared on either side of a junction.
pub const JUNCTION_POSES: usize = 3;

/// Sum of pose distances between the last three poses of `prev` and the first
/// three of `next`, paired in order.
pub fn junction_distance(prev: &MotionWord, next: &MotionWord) -> Result<f64> {
    let n = JUNCTION_POSES.min(prev.len()).min(next.len());
    let tail = &prev.frames[prev.len() - n..];
    tail.iter().zip(&next.frames[..n]).map(|(a, b)| pose_distance(a, b)).sum()
}

/// Index of the candidate that joins `prev` most smoothly; ties keep the
/// earliest. Without a previous word the first candidate (the motif's
/// representative, by convention) is taken.
pub fn select_word(candidates: &[&MotionWord], prev: Option<&MotionWord>) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::TooFew("empty cluster".into()));
    }
    let Some(prev) = prev else { return Ok(0) };
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let d = junction_distance(prev, c)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// Time-scales `next` to `frames` and eases its first `blend` rotations out
/// of `prev_pose` with weights `(blend - i) / (blend + 1)`.
pub fn stitch(prev_pose: Option<&Pose>, next: &MotionWord, frames: usize, blend: usize) -> Result<MotionWord> {
    let mut word = timescale_word(next, frames)?;
    let Some(prev) = prev_pose else { return Ok(word) };
    if prev.rotations.len() != word.frames[0].rotations.len() {
        return Err(Error::SkeletonMismatch("stitching words of different skeletons".into()));
    }
    for i in 0..blend.min(word.len()) {
        let w = (blend - i) as f64 / (blend + 1) as f64;
        for (q, p) in word.frames[i].rotations.iter_mut().zip(&prev.rotations) {
            *q = q.slerp(*p, w);
        }
    }
    Ok(word)
}
