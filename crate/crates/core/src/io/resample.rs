use crate::error::{Error, Result};
use crate::motion::{MotionClip, SkeletonPose};
use crate::quat::Vec3;
use crate::scalar::Real;

/// Resamples a clip to `target_fps` by interpolation in time: rotations by
/// shortest-arc slerp, root trajectory linearly on accumulated positions.
/// Non-integer rate ratios are supported.
pub fn resample<T: Real>(clip: &MotionClip<T>, target_fps: f64) -> Result<MotionClip<T>> {
    if !(target_fps > 0.0) || !target_fps.is_finite() {
        return Err(Error::InvalidArgument(format!("target fps {target_fps}")));
    }
    if !(clip.fps > 0.0) {
        return Err(Error::InvalidArgument(format!("source fps {}", clip.fps)));
    }
    if target_fps == clip.fps || clip.is_empty() {
        let mut out = clip.clone();
        out.fps = target_fps;
        return Ok(out);
    }
    let n = clip.len();
    let ratio = clip.fps / target_fps;
    let n_out = ((n - 1) as f64 / ratio + 1e-9).floor() as usize + 1;
    let positions = clip.root_positions();

    let sample = |m: usize| -> (usize, T) {
        let u = m as f64 * ratio;
        let i = (u.floor() as usize).min(n - 1);
        (i, T::lit(u - i as f64))
    };

    let mut abs = Vec::with_capacity(n_out);
    let mut frames = Vec::with_capacity(n_out);
    for m in 0..n_out {
        let (i, a) = sample(m);
        let j = (i + 1).min(n - 1);
        abs.push(positions[i].lerp(positions[j], a));
        let rotations = clip.frames[i]
            .rotations
            .iter()
            .zip(&clip.frames[j].rotations)
            .map(|(qa, qb)| qa.slerp(*qb, a))
            .collect();
        frames.push(SkeletonPose {
            root_displacement: Vec3::zero(),
            rotations,
        });
    }
    let first_disp = clip.frames[0].root_displacement.scale(T::lit(ratio));
    frames[0].root_displacement = first_disp;
    for m in 1..n_out {
        frames[m].root_displacement = abs[m] - abs[m - 1];
    }
    Ok(MotionClip {
        skeleton: clip.skeleton.clone(),
        frames,
        fps: target_fps,
        root_origin: abs[0] - first_disp,
    })
}
