use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ContactConfig, FootContactLabels, FootPoint};
use crate::motion::forward_kinematics_full;
use crate::quat::{Quaternion, Vec3};
use crate::{Clip, Skeleton};

/// Hip, knee and ankle joints of one leg, plus the point that touches the
/// ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegChain {
    pub hip: usize,
    pub knee: usize,
    pub ankle: usize,
    pub foot: FootPoint,
}

impl LegChain {
    /// The ankle is the first joint from the contact point up whose name
    /// mentions "foot" or "ankle" (else the contact joint itself); knee and hip
    /// are its parent and grandparent.
    pub fn from_contact(skeleton: &Skeleton, foot: FootPoint) -> Result<Self> {
        let start = foot.joint(skeleton);
        let chain = skeleton.chain_to_root(start);
        let ankle = chain
            .iter()
            .copied()
            .find(|&j| {
                let n = skeleton.joints()[j].name.to_ascii_lowercase();
                n.contains("foot") || n.contains("ankle")
            })
            .unwrap_or(start);
        let knee = skeleton.parent(ankle);
        let hip = knee.and_then(|k| skeleton.parent(k));
        match (knee, hip) {
            (Some(knee), Some(hip)) => Ok(Self { hip, knee, ankle, foot }),
            _ => Err(Error::InvalidSkeleton(format!(
                "joint `{}` has no two-bone leg above it",
                skeleton.joints()[ankle].name
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkConfig {
    /// Frames over which corrections fade in before and out after a span.
    pub blend_frames: usize,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self { blend_frames: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub clip: Clip,
    /// Frames whose target lay outside the leg's reach.
    pub clamped: Vec<usize>,
}

fn point_position(fk: &crate::motion::FkResult<f64>, foot: FootPoint) -> Vec3<f64> {
    match foot {
        FootPoint::Joint(j) => fk.positions[j],
        FootPoint::EndSite(e) => fk.end_sites[e],
    }
}

/// Pins each foot to its world position at the start of every contact span
/// with analytic two-bone IK. The ankle keeps its span-start world
/// orientation; the knee bends in its current plane and the hip swings onto
/// the target. Only hip, knee and ankle rotations change.
pub fn clean_foot_sliding(clip: &Clip, contacts: &FootContactLabels, contact_cfg: &ContactConfig, cfg: &IkConfig) -> Result<IkResult> {
    if contacts.len() != clip.len() {
        return Err(Error::Schema(format!("{} contact labels for {} frames", contacts.len(), clip.len())));
    }
    let skel = clip.skeleton.clone();
    let legs = [
        LegChain::from_contact(&skel, FootPoint::resolve(&skel, &contact_cfg.left_foot)?)?,
        LegChain::from_contact(&skel, FootPoint::resolve(&skel, &contact_cfg.right_foot)?)?,
    ];
    let mut out = clip.clone();
    let roots = clip.root_positions();
    let mut clamped = Vec::new();
    for (side, leg) in legs.iter().enumerate() {
        for (start, end) in contacts.spans(side) {
            let fk0 = forward_kinematics_full(&out.frames[start], &skel, roots[start]);
            let target = point_position(&fk0, leg.foot);
            let ankle_rot = fk0.rotations[leg.ankle];
            let ankle_to_point = target - fk0.positions[leg.ankle];
            for t in start..end {
                let (solved, hit_limit) = solve_leg(&out, t, roots[t], leg, target - ankle_to_point, ankle_rot);
                if hit_limit {
                    clamped.push(t);
                }
                set_leg(&mut out, t, leg, solved);
            }
            // fade the boundary corrections into the neighbouring free frames
            let fade = |out: &mut Clip, anchor: usize, frames: Vec<usize>, original: &Clip| {
                let delta = leg_delta(original, out, anchor, leg);
                let n = frames.len();
                for (i, t) in frames.into_iter().enumerate() {
                    if contacts.frames[t][side] == 1 {
                        continue;
                    }
                    let w = (n - i) as f64 / (n + 1) as f64;
                    let cur = leg_rotations(out, t, leg);
                    let faded = [0, 1, 2].map(|k| Quaternion::identity().slerp(delta[k], w) * cur[k]);
                    set_leg(out, t, leg, faded.map(|q| q.normalized_or_identity()));
                }
            };
            let before: Vec<usize> = (start.saturating_sub(cfg.blend_frames)..start).rev().collect();
            let after: Vec<usize> = (end..(end + cfg.blend_frames).min(clip.len())).collect();
            fade(&mut out, start, before, clip);
            fade(&mut out, end - 1, after, clip);
        }
    }
    clamped.sort_unstable();
    clamped.dedup();
    Ok(IkResult { clip: out, clamped })
}

fn leg_rotations(clip: &Clip, t: usize, leg: &LegChain) -> [Quaternion<f64>; 3] {
    let r = &clip.frames[t].rotations;
    [r[leg.hip], r[leg.knee], r[leg.ankle]]
}

fn set_leg(clip: &mut Clip, t: usize, leg: &LegChain, q: [Quaternion<f64>; 3]) {
    let r = &mut clip.frames[t].rotations;
    r[leg.hip] = q[0];
    r[leg.knee] = q[1];
    r[leg.ankle] = q[2];
}

/// Local-rotation corrections `new * old^-1` applied at frame `t`.
fn leg_delta(original: &Clip, cleaned: &Clip, t: usize, leg: &LegChain) -> [Quaternion<f64>; 3] {
    let a = leg_rotations(original, t, leg);
    let b = leg_rotations(cleaned, t, leg);
    [0, 1, 2].map(|k| (b[k] * a[k].inverse()).normalized_or_identity())
}

fn solve_leg(
    clip: &Clip,
    t: usize,
    root: Vec3<f64>,
    leg: &LegChain,
    ankle_target: Vec3<f64>,
    ankle_world: Quaternion<f64>,
) -> ([Quaternion<f64>; 3], bool) {
    let skel = &clip.skeleton;
    let pose = &clip.frames[t];
    let fk = forward_kinematics_full(pose, skel, root);
    let (hip, knee, ankle) = (fk.positions[leg.hip], fk.positions[leg.knee], fk.positions[leg.ankle]);
    let parent_rot = skel.parent(leg.hip).map_or(Quaternion::identity(), |p| fk.rotations[p]);
    let (g_hip, g_knee) = (fk.rotations[leg.hip], fk.rotations[leg.knee]);
    let upper = knee - hip;
    let lower = ankle - knee;
    let (a, b) = (upper.norm(), lower.norm());

    let wanted = (ankle_target - hip).norm();
    let (lo, hi) = ((a - b).abs(), a + b);
    let d = wanted.clamp(lo, hi);
    let limited = wanted > hi * (1.0 + 1e-9) || wanted < lo * (1.0 - 1e-9);

    // knee: change the interior angle about the knee-plane normal
    let normal = upper
        .cross(lower)
        .normalized()
        .unwrap_or_else(|| g_hip.rotate(Vec3::new(1.0, 0.0, 0.0)));
    let interior = |len: f64| ((a * a + b * b - len * len) / (2.0 * a * b)).clamp(-1.0, 1.0).acos();
    let delta = interior((ankle - hip).norm()) - interior(d);
    let candidates = [delta, -delta].map(|ang| {
        let r = Quaternion::from_axis_angle(normal, ang);
        (r, (knee + r.rotate(lower) - hip).norm())
    });
    let r_knee = if (candidates[0].1 - d).abs() <= (candidates[1].1 - d).abs() { candidates[0].0 } else { candidates[1].0 };
    let new_ankle = knee + r_knee.rotate(lower);

    // hip: swing the whole leg onto the target direction
    let r_hip = Quaternion::between(new_ankle - hip, ankle_target - hip);
    let g_hip_new = r_hip * g_hip;
    let g_knee_new = r_hip * r_knee * g_knee;
    let hip_local = (parent_rot.inverse() * g_hip_new).normalized_or_identity();
    let knee_local = (g_hip_new.inverse() * g_knee_new).normalized_or_identity();
    let ankle_local = (g_knee_new.inverse() * ankle_world).normalized_or_identity();
    ([hip_local, knee_local, ankle_local], limited)
}
