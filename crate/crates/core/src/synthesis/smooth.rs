use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::Clip;

/// Replaces each root rotation with the normalized mean of the rotations in a
/// centred window of `window` frames (shrunk at the ends), after flipping each
/// into the hemisphere of the centre frame. Other joints are untouched.
pub fn smooth_root_orientation(clip: &Clip, window: usize) -> Result<Clip> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    let mut out = clip.clone();
    if window == 1 || clip.len() < 2 {
        return Ok(out);
    }
    let root = clip.skeleton.root_index();
    let half = window / 2;
    let n = clip.len();
    for t in 0..n {
        let centre = clip.frames[t].rotations[root];
        let (lo, hi) = (t.saturating_sub(half), (t + half).min(n - 1));
        let mut acc = Quaternion::new(0.0, 0.0, 0.0, 0.0);
        for s in lo..=hi {
            let q = clip.frames[s].rotations[root];
            acc = acc + if q.dot(centre) < 0.0 { -q } else { q };
        }
        out.frames[t].rotations[root] = acc.normalized().unwrap_or(centre);
    }
    Ok(out)
}
