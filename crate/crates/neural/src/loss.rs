//! Coherence, auto-conditioned and perceptual losses with their gradients.

use choreo_core::motif::EmbeddingBasis;
use choreo_core::Skeleton;
use serde::{Deserialize, Serialize};

use crate::config::NetConfig;
use crate::error::{NeuralError, Result};
use crate::grad::{geodesic_sq, qmul, qmul_back, rotate, rotate_back, slerp, slerp_back, Q, SlerpCache, V};

/// One pose frame as the network sees it: `[root(3), q_0(4), ...]` plus
/// contact values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub pose: Vec<f64>,
    pub contacts: [f64; 2],
}

impl Frame {
    pub fn joints(&self) -> usize {
        (self.pose.len() - 3) / 4
    }

    pub fn quat(&self, j: usize) -> Q {
        quat_at(&self.pose, j)
    }
}

pub(crate) fn quat_at(pose: &[f64], j: usize) -> Q {
    let r = 3 + 4 * j;
    [pose[r], pose[r + 1], pose[r + 2], pose[r + 3]]
}

/// Relative weights of the three coherence terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeights {
    pub rotation: f64,
    pub position: f64,
    pub contact: f64,
}

impl TermWeights {
    pub fn from_config(c: &NetConfig) -> Self {
        Self { rotation: 1.0, position: c.position_weight, contact: c.contact_weight }
    }
}

/// Joint and end-site world positions with the root placed at the frame's
/// root displacement.
#[derive(Debug, Clone)]
pub struct FkPoints {
    pub points: Vec<V>,
    world: Vec<Q>,
}

pub fn fk_points(skeleton: &Skeleton, pose: &[f64]) -> FkPoints {
    let joints = skeleton.joints();
    let mut points: Vec<V> = Vec::with_capacity(joints.len() + skeleton.end_sites().len());
    let mut world: Vec<Q> = Vec::with_capacity(joints.len());
    for (j, joint) in joints.iter().enumerate() {
        let q = quat_at(pose, j);
        match joint.parent {
            None => {
                points.push([pose[0], pose[1], pose[2]]);
                world.push(q);
            }
            Some(p) => {
                let r = rotate(world[p], joint.offset.to_array());
                points.push([points[p][0] + r[0], points[p][1] + r[1], points[p][2] + r[2]]);
                world.push(qmul(world[p], q));
            }
        }
    }
    for e in skeleton.end_sites() {
        let r = rotate(world[e.parent], e.offset.to_array());
        let p = points[e.parent];
        points.push([p[0] + r[0], p[1] + r[1], p[2] + r[2]]);
    }
    FkPoints { points, world }
}

/// Gradient of a scalar with respect to the pose given its gradient with
/// respect to every FK point. Accumulates into `g_pose`.
pub fn fk_points_back(skeleton: &Skeleton, pose: &[f64], fk: &FkPoints, g_points: &[V], g_pose: &mut [f64]) {
    let joints = skeleton.joints();
    let nj = joints.len();
    let mut gp: Vec<V> = g_points[..nj].to_vec();
    let mut gw: Vec<Q> = vec![[0.0; 4]; nj];
    for (e, g) in skeleton.end_sites().iter().zip(&g_points[nj..]) {
        for k in 0..3 {
            gp[e.parent][k] += g[k];
        }
        let (gq, _) = rotate_back(fk.world[e.parent], e.offset.to_array(), *g);
        add4(&mut gw[e.parent], gq);
    }
    for j in (1..nj).rev() {
        let p = joints[j].parent.expect("non-root joint has a parent");
        let gj = gp[j];
        for k in 0..3 {
            gp[p][k] += gj[k];
        }
        let (gq, _) = rotate_back(fk.world[p], joints[j].offset.to_array(), gj);
        add4(&mut gw[p], gq);
        let (ga, gb) = qmul_back(fk.world[p], quat_at(pose, j), gw[j]);
        add4(&mut gw[p], ga);
        let r = 3 + 4 * j;
        for k in 0..4 {
            g_pose[r + k] += gb[k];
        }
    }
    for k in 0..4 {
        g_pose[3 + k] += gw[0][k];
    }
    for k in 0..3 {
        g_pose[k] += gp[0][k];
    }
}

fn add4(a: &mut Q, b: Q) {
    for k in 0..4 {
        a[k] += b[k];
    }
}

/// Value and gradients of the coherence metric for one predicted frame.
#[derive(Debug, Clone)]
pub struct FrameLoss {
    pub value: f64,
    pub rotation: f64,
    pub position: f64,
    pub contact: f64,
    /// Gradient on the predicted pose block.
    pub g_pose: Vec<f64>,
    /// Gradient on the two contact logits.
    pub g_logit: [f64; 2],
}

/// Coherence metric on one frame: geodesic pose distance, weighted mean
/// squared FK position error and mean contact cross-entropy.
///
/// The prediction carries contact logits; `truth_points` are the FK points of
/// the true pose.
pub fn frame_loss(
    skeleton: &Skeleton,
    pred_pose: &[f64],
    pred_logits: [f64; 2],
    truth: &Frame,
    truth_points: &[V],
    w: TermWeights,
) -> FrameLoss {
    let nj = skeleton.joint_count();
    let mut g_pose = vec![0.0; pred_pose.len()];
    let mut rotation = 0.0;
    if w.rotation != 0.0 {
        for j in 0..nj {
            let (d, g) = geodesic_sq(quat_at(pred_pose, j), truth.quat(j));
            rotation += d;
            for k in 0..4 {
                g_pose[3 + 4 * j + k] += w.rotation * g[k];
            }
        }
    }
    let mut position = 0.0;
    if w.position != 0.0 {
        let fk = fk_points(skeleton, pred_pose);
        let n = fk.points.len() as f64;
        let mut g_points = Vec::with_capacity(fk.points.len());
        for (p, t) in fk.points.iter().zip(truth_points) {
            let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
            position += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / n;
            let s = 2.0 * w.position / n;
            g_points.push([s * d[0], s * d[1], s * d[2]]);
        }
        fk_points_back(skeleton, pred_pose, &fk, &g_points, &mut g_pose);
    }
    let mut contact = 0.0;
    let mut g_logit = [0.0; 2];
    if w.contact != 0.0 {
        for k in 0..2 {
            let (l, g) = crate::grad::bce_logit(pred_logits[k], truth.contacts[k]);
            contact += l / 2.0;
            g_logit[k] = w.contact * g / 2.0;
        }
    }
    FrameLoss {
        value: w.rotation * rotation + w.position * position + w.contact * contact,
        rotation,
        position,
        contact,
        g_pose,
        g_logit,
    }
}

/// Coherence metric between a predicted and a true frame, with contacts given
/// as probabilities.
pub fn loss_coherence(skeleton: &Skeleton, pred: &Frame, truth: &Frame, w: TermWeights) -> Result<f64> {
    check_frame(skeleton, pred)?;
    check_frame(skeleton, truth)?;
    let truth_points = fk_points(skeleton, &truth.pose).points;
    let mut value = frame_loss(skeleton, &pred.pose, [0.0; 2], truth, &truth_points, TermWeights { contact: 0.0, ..w }).value;
    if w.contact != 0.0 {
        let mut bce = 0.0;
        for k in 0..2 {
            let p = pred.contacts[k];
            let y = truth.contacts[k];
            let term = |y: f64, p: f64| if y == 0.0 { 0.0 } else { -y * p.max(f64::MIN_POSITIVE).ln() };
            bce += (term(y, p) + term(1.0 - y, 1.0 - p)) / 2.0;
        }
        value += w.contact * bce;
    }
    Ok(value)
}

fn check_frame(skeleton: &Skeleton, f: &Frame) -> Result<()> {
    if f.pose.len() != skeleton.pose_dim() {
        return Err(NeuralError::Dimension(format!(
            "frame has {} values, skeleton expects {}",
            f.pose.len(),
            skeleton.pose_dim()
        )));
    }
    Ok(())
}

/// Timescaled, flattened word and the bookkeeping needed to backpropagate.
struct Flattened {
    x: Vec<f64>,
    /// Per target frame: source index, interpolation weight and slerp caches.
    taps: Vec<(usize, f64, Vec<SlerpCache>)>,
    signs: Vec<Vec<f64>>,
    identity: bool,
}

fn flatten(poses: &[&[f64]], frames: usize, joints: usize) -> Flattened {
    let n = poses.len();
    let pd = 3 + 4 * joints;
    let identity = n == frames;
    let mut scaled: Vec<Vec<f64>> = Vec::with_capacity(frames);
    let mut taps = Vec::with_capacity(frames);
    if identity {
        scaled = poses.iter().map(|p| p.to_vec()).collect();
    } else {
        let mut cumulative: Vec<V> = Vec::with_capacity(n);
        let mut acc = [0.0; 3];
        for p in poses {
            for k in 0..3 {
                acc[k] += p[k];
            }
            cumulative.push(acc);
        }
        let step = (n - 1) as f64 / (frames - 1) as f64;
        let mut prev = [0.0; 3];
        for m in 0..frames {
            let u = if m == frames - 1 { (n - 1) as f64 } else { m as f64 * step };
            let i = (u.floor() as usize).min(n - 2);
            let a = u - i as f64;
            let mut f = vec![0.0; pd];
            let c = if m == 0 {
                cumulative[0]
            } else {
                let (p, q) = (cumulative[i], cumulative[i + 1]);
                [p[0] + (q[0] - p[0]) * a, p[1] + (q[1] - p[1]) * a, p[2] + (q[2] - p[2]) * a]
            };
            for k in 0..3 {
                f[k] = c[k] - prev[k];
            }
            prev = c;
            let mut caches = Vec::with_capacity(joints);
            for j in 0..joints {
                let (q, cache) = slerp(quat_at(poses[i], j), quat_at(poses[i + 1], j), a);
                f[3 + 4 * j..7 + 4 * j].copy_from_slice(&q);
                caches.push(cache);
            }
            scaled.push(f);
            taps.push((i, a, caches));
        }
    }
    let mut signs = vec![vec![1.0; joints]; frames];
    let mut x = Vec::with_capacity(frames * pd);
    for t in 0..frames {
        for j in 0..joints {
            let q = quat_at(&scaled[t], j);
            signs[t][j] = if t == 0 {
                if q[0] < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                let p = quat_at(&scaled[t - 1], j);
                let d = q[0] * p[0] + q[1] * p[1] + q[2] * p[2] + q[3] * p[3];
                if d * signs[t - 1][j] < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            };
        }
        x.extend_from_slice(&scaled[t][..3]);
        for j in 0..joints {
            let q = quat_at(&scaled[t], j);
            x.extend(q.iter().map(|v| v * signs[t][j]));
        }
    }
    Flattened { x, taps, signs, identity }
}

fn flatten_back(poses: &[&[f64]], frames: usize, joints: usize, fl: &Flattened, g_x: &[f64]) -> Vec<Vec<f64>> {
    let n = poses.len();
    let pd = 3 + 4 * joints;
    // undo the hemisphere signs
    let g_scaled: Vec<Vec<f64>> = (0..frames)
        .map(|t| {
            let mut g = g_x[t * pd..(t + 1) * pd].to_vec();
            for j in 0..joints {
                for k in 0..4 {
                    g[3 + 4 * j + k] *= fl.signs[t][j];
                }
            }
            g
        })
        .collect();
    if fl.identity {
        return g_scaled;
    }
    let mut g_poses = vec![vec![0.0; pd]; n];
    let mut g_cum = vec![[0.0; 3]; n];
    for m in 0..frames {
        let (i, a, caches) = &fl.taps[m];
        let mut g_c = [0.0; 3];
        for k in 0..3 {
            g_c[k] = g_scaled[m][k] - if m + 1 < frames { g_scaled[m + 1][k] } else { 0.0 };
        }
        if m == 0 {
            for k in 0..3 {
                g_cum[0][k] += g_c[k];
            }
        } else {
            for k in 0..3 {
                g_cum[*i][k] += (1.0 - a) * g_c[k];
                g_cum[*i + 1][k] += a * g_c[k];
            }
        }
        for j in 0..joints {
            let p = quat_at(poses[*i], j);
            let q = quat_at(poses[*i + 1], j);
            let (out, _) = slerp(p, q, *a);
            let g = quat_at(&g_scaled[m], j);
            let (gp, gq) = slerp_back(p, q, *a, out, &caches[j], g);
            for k in 0..4 {
                g_poses[*i][3 + 4 * j + k] += gp[k];
                g_poses[*i + 1][3 + 4 * j + k] += gq[k];
            }
        }
    }
    let mut acc = [0.0; 3];
    for t in (0..n).rev() {
        for k in 0..3 {
            acc[k] += g_cum[t][k];
            g_poses[t][k] += acc[k];
        }
    }
    g_poses
}

/// Unit-norm embedding of a generated word, matching the engine's motif-space
/// projection.
pub fn embed_poses(poses: &[&[f64]], basis: &EmbeddingBasis) -> Result<Vec<f64>> {
    Ok(perceptual_inner(poses, None, basis)?.1)
}

/// Squared distance between the embedding of a generated word and a target
/// motif vector, plus the gradient on each word frame's pose.
pub fn loss_perceptual(poses: &[&[f64]], target: &[f64], basis: &EmbeddingBasis) -> Result<(f64, Vec<Vec<f64>>)> {
    let (value, _, grads) = perceptual_inner(poses, Some(target), basis)?;
    Ok((value, grads))
}

fn perceptual_inner(
    poses: &[&[f64]],
    target: Option<&[f64]>,
    basis: &EmbeddingBasis,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let joints = basis.joint_count;
    if poses.len() < 2 {
        return Err(NeuralError::Data(format!("word of {} frames", poses.len())));
    }
    if poses.iter().any(|p| p.len() != 3 + 4 * joints) {
        return Err(NeuralError::Dimension("word frames do not match the embedding skeleton".into()));
    }
    if let Some(t) = target {
        if t.len() != basis.dim() {
            return Err(NeuralError::Dimension(format!("target has {} values, basis has {}", t.len(), basis.dim())));
        }
    }
    let fl = flatten(poses, basis.word_frames, joints);
    let y = basis.project(&fl.x);
    let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return Err(NeuralError::Data("word projects to zero".into()));
    }
    let e: Vec<f64> = y.iter().map(|a| a / norm).collect();
    let Some(target) = target else {
        return Ok((0.0, e, Vec::new()));
    };
    let value: f64 = e.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
    let g_e: Vec<f64> = e.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
    let dot: f64 = e.iter().zip(&g_e).map(|(a, b)| a * b).sum();
    let g_y: Vec<f64> = g_e.iter().zip(&e).map(|(g, a)| (g - a * dot) / norm).collect();
    let mut g_x = vec![0.0; fl.x.len()];
    for (c, gy) in basis.components.iter().zip(&g_y) {
        for (gx, ci) in g_x.iter_mut().zip(c) {
            *gx += gy * ci;
        }
    }
    let grads = flatten_back(poses, basis.word_frames, joints, &fl, &g_x);
    Ok((value, e, grads))
}

/// `coherence + autoconditioned + lambda * perceptual`
pub fn total_loss(coherence: f64, autoconditioned: f64, perceptual: f64, lambda: f64) -> f64 {
    coherence + autoconditioned + lambda * perceptual
}
