//! Procedural skeletons, clips and dance corpora for tests, demos and the
//! acceptance suite.
//!
//! Synthetic dances are sequences of beat-long movements. Every movement
//! starts and ends in the rest pose with zero velocity, so kinematic beats
//! fall on word boundaries, and each is a jittered copy of one of a few
//! prototypes, so clustering has a known ground truth.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng as _;

use crate::audio::{synth_beat_grid, BeatGrid};
use crate::io::{detect_foot_contacts, ContactConfig, CorpusEntry, FootContactLabels};
use crate::motion::{forward_kinematics_full, Channel, EndSite, Joint, MotionClip, SkeletonPose};
use crate::quat::{Quaternion, Vec3};
use crate::rng::{self, Rng};
use crate::{Clip, Skeleton};

fn rot_channels() -> Vec<Channel> {
    vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation]
}

/// 15-joint biped in depth-first order, y-up, centimetres.
pub fn biped() -> Arc<Skeleton> {
    let spec: &[(&str, Option<usize>, [f64; 3])] = &[
        ("Hips", None, [0.0, 0.0, 0.0]),
        ("Spine", Some(0), [0.0, 10.0, 0.0]),
        ("Head", Some(1), [0.0, 30.0, 0.0]),
        ("LeftArm", Some(1), [15.0, 25.0, 0.0]),
        ("LeftForeArm", Some(3), [25.0, 0.0, 0.0]),
        ("RightArm", Some(1), [-15.0, 25.0, 0.0]),
        ("RightForeArm", Some(5), [-25.0, 0.0, 0.0]),
        ("LeftUpLeg", Some(0), [9.0, -5.0, 0.0]),
        ("LeftLeg", Some(7), [0.0, -40.0, 0.0]),
        ("LeftFoot", Some(8), [0.0, -40.0, 0.0]),
        ("LeftToe", Some(9), [0.0, -5.0, 12.0]),
        ("RightUpLeg", Some(0), [-9.0, -5.0, 0.0]),
        ("RightLeg", Some(11), [0.0, -40.0, 0.0]),
        ("RightFoot", Some(12), [0.0, -40.0, 0.0]),
        ("RightToe", Some(13), [0.0, -5.0, 12.0]),
    ];
    let joints = spec
        .iter()
        .map(|&(name, parent, o)| Joint {
            name: name.to_string(),
            parent,
            offset: Vec3::new(o[0], o[1], o[2]),
            channels: if parent.is_none() {
                let mut c = vec![Channel::Xposition, Channel::Yposition, Channel::Zposition];
                c.extend(rot_channels());
                c
            } else {
                rot_channels()
            },
        })
        .collect();
    let end = |name: &str, parent: usize, o: [f64; 3]| EndSite {
        name: name.to_string(),
        parent,
        offset: Vec3::new(o[0], o[1], o[2]),
    };
    let end_sites = vec![
        end("Head_End", 2, [0.0, 15.0, 0.0]),
        end("LeftForeArm_End", 4, [20.0, 0.0, 0.0]),
        end("RightForeArm_End", 6, [-20.0, 0.0, 0.0]),
        end("LeftToe_End", 10, [0.0, 0.0, 4.0]),
        end("RightToe_End", 14, [0.0, 0.0, 4.0]),
    ];
    Arc::new(Skeleton::new(joints, end_sites).expect("valid biped"))
}

/// Root height that puts the lowest toe of `pose` on the ground plane.
pub fn grounded_height(skeleton: &Skeleton, pose: &Pose) -> f64 {
    let fk = forward_kinematics_full(pose, skeleton, Vec3::zero());
    let toes = ["LeftToe", "RightToe"].map(|n| skeleton.joint_index(n).map_or(0.0, |j| fk.positions[j].y));
    -toes[0].min(toes[1])
}

type Pose = SkeletonPose<f64>;

/// Rest pose with both toes on the ground, repeated `n` times.
pub fn standing_clip(n: usize) -> Clip {
    let skel = biped();
    let pose = Pose::identity(skel.joint_count());
    let h = grounded_height(&skel, &pose);
    let mut clip = MotionClip::new(skel, vec![pose; n], 30.0);
    clip.root_origin = Vec3::new(0.0, h, 0.0);
    clip
}

fn x_rot(deg: f64) -> Quaternion<f64> {
    Quaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), deg.to_radians())
}

/// Alternating stance/swing in a 30-frame cycle with the root held in place.
/// Returns the clip and the labels implied by its construction: a foot is in
/// contact on frames where it is in stance and did not move since the
/// previous frame.
pub fn gait_clip(n: usize) -> (Clip, FootContactLabels) {
    let skel = biped();
    let hips = [skel.joint_index("LeftUpLeg").unwrap(), skel.joint_index("RightUpLeg").unwrap()];
    let stance = |side: usize, t: usize| -> bool {
        let phase = t % 30;
        if side == 0 { phase < 15 } else { phase >= 15 }
    };
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let mut pose = Pose::identity(skel.joint_count());
        for side in 0..2 {
            if !stance(side, t) {
                let k = (t % 15) as f64;
                pose.rotations[hips[side]] = x_rot(-(25.0 + 20.0 * (PI * (k + 1.0) / 16.0).sin()));
            }
        }
        frames.push(pose);
    }
    let h = grounded_height(&skel, &Pose::identity(skel.joint_count()));
    let mut clip = MotionClip::new(skel, frames, 30.0);
    clip.root_origin = Vec3::new(0.0, h, 0.0);
    let labels = (0..n)
        .map(|t| {
            let other = if t == 0 { 1.min(n - 1) } else { t - 1 };
            [0, 1].map(|s| u8::from(stance(s, t) && stance(s, other)))
        })
        .collect();
    (clip, FootContactLabels { frames: labels })
}

/// Slightly crouched stance whose root drifts along +x by `drift` per frame,
/// with both feet labelled in contact for frames `[span.0, span.1)`.
pub fn sliding_foot_clip(n: usize, drift: f64, span: (usize, usize)) -> (Clip, FootContactLabels) {
    let skel = biped();
    let mut pose = Pose::identity(skel.joint_count());
    for (name, deg) in [("LeftUpLeg", -20.0), ("LeftLeg", 40.0), ("LeftFoot", -20.0), ("RightUpLeg", -15.0), ("RightLeg", 30.0), ("RightFoot", -15.0)] {
        pose.rotations[skel.joint_index(name).unwrap()] = x_rot(deg);
    }
    let h = grounded_height(&skel, &pose);
    let frames = (0..n)
        .map(|t| {
            let mut p = pose.clone();
            p.root_displacement = if t == 0 { Vec3::zero() } else { Vec3::new(drift, 0.0, 0.0) };
            p
        })
        .collect();
    let mut clip = MotionClip::new(skel, frames, 30.0);
    clip.root_origin = Vec3::new(0.0, h, 0.0);
    let labels = (0..n).map(|t| if t >= span.0 && t < span.1 { [1, 1] } else { [0, 0] }).collect();
    (clip, FootContactLabels { frames: labels })
}

/// A beat-long movement: a set of joints tracing cones whose opening follows
/// `sin^2(pi u)`, plus a root translation with the same profile.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementPrototype {
    pub joints: Vec<(usize, Vec3<f64>, Vec3<f64>, f64)>,
    pub root_travel: Vec3<f64>,
    pub phase: f64,
}

impl MovementPrototype {
    pub fn random(skeleton: &Skeleton, rng: &mut Rng) -> Self {
        let movable: Vec<usize> = (1..skeleton.joint_count())
            .filter(|&j| !skeleton.joints()[j].name.ends_with("Toe"))
            .collect();
        let count = rng.random_range(3..=5);
        let mut joints = Vec::with_capacity(count);
        let mut pool = movable;
        for _ in 0..count {
            let j = pool.swap_remove(rng.random_range(0..pool.len()));
            let a = random_unit(rng);
            let b = a.cross(random_unit(rng)).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
            joints.push((j, a, b, rng.random_range(0.35..0.9)));
        }
        joints.sort_by_key(|j| j.0);
        let root_travel = Vec3::new(rng.random_range(-8.0..8.0), 0.0, rng.random_range(-8.0..8.0));
        Self { joints, root_travel, phase: rng.random_range(0.0..2.0 * PI) }
    }

    fn jittered(&self, amount: f64, rng: &mut Rng) -> Self {
        let mut p = self.clone();
        for j in &mut p.joints {
            j.3 *= 1.0 + amount * rng.random_range(-1.0..1.0);
        }
        p.phase += amount * rng.random_range(-1.0..1.0);
        p.root_travel = p.root_travel.scale(1.0 + amount * rng.random_range(-1.0..1.0));
        p
    }

    /// `frames` poses sampled at `u = i / (frames - 1)`.
    pub fn render(&self, joint_count: usize, frames: usize) -> Vec<Pose> {
        let weights: Vec<f64> = (0..frames)
            .map(|i| {
                let u = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
                (PI * u).sin().powi(2)
            })
            .collect();
        let total: f64 = weights.iter().sum::<f64>().max(1e-12);
        (0..frames)
            .map(|i| {
                let u = if frames > 1 { i as f64 / (frames - 1) as f64 } else { 0.0 };
                let mut pose = Pose::identity(joint_count);
                let open = (PI * u).sin().powi(2);
                let ang = 2.0 * PI * u + self.phase;
                for &(j, a, b, amp) in &self.joints {
                    let dir = a.scale(ang.cos()) + b.scale(ang.sin());
                    pose.rotations[j] = Quaternion::from_rotation_vector(dir.scale(amp * open));
                }
                pose.root_displacement = self.root_travel.scale(weights[i] / total);
                pose
            })
            .collect()
    }
}

fn random_unit(rng: &mut Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpusConfig {
    pub prototypes: usize,
    pub dances: usize,
    pub beats_per_dance: (usize, usize),
    pub bpm: (f64, f64),
    pub jitter: f64,
    pub genre: String,
    /// Successors per prototype in the generating Markov chain.
    pub successors: usize,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            prototypes: 8,
            dances: 6,
            beats_per_dance: (30, 50),
            bpm: (120.0, 150.0),
            jitter: 0.05,
            genre: "synthetic".into(),
            successors: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDance {
    pub entry: CorpusEntry,
    /// Generating prototype of each word.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub prototypes: Vec<MovementPrototype>,
    pub chain: Vec<Vec<(usize, f64)>>,
    pub dances: Vec<SyntheticDance>,
}

impl SyntheticCorpus {
    pub fn entries(&self) -> Vec<CorpusEntry> {
        self.dances.iter().map(|d| d.entry.clone()).collect()
    }
}

/// Irreducible Markov chain with `successors` targets per state.
pub fn random_chain(states: usize, successors: usize, rng: &mut Rng) -> Vec<Vec<(usize, f64)>> {
    (0..states)
        .map(|i| {
            // the cycle i -> i+1 keeps every state reachable
            let next = (i + 1) % states;
            let mut targets: Vec<usize> = (0..states).filter(|&t| t != next).collect();
            let mut row = vec![(next, rng.random_range(0.2..1.0))];
            for _ in 1..successors.clamp(1, states) {
                let t = targets.swap_remove(rng.random_range(0..targets.len()));
                row.push((t, rng.random_range(0.2..1.0)));
            }
            let s: f64 = row.iter().map(|r| r.1).sum();
            row.iter_mut().for_each(|r| r.1 /= s);
            row.sort_by_key(|r| r.0);
            row
        })
        .collect()
}

pub fn walk_chain(chain: &[Vec<(usize, f64)>], start: usize, len: usize, rng: &mut Rng) -> Vec<usize> {
    let mut seq = Vec::with_capacity(len);
    let mut cur = start;
    for _ in 0..len {
        seq.push(cur);
        let weights: Vec<f64> = chain[cur].iter().map(|r| r.1).collect();
        cur = chain[cur][rng::sample_index(&weights, rng).unwrap_or(0)].0;
    }
    seq
}

/// Renders a dance for a beat grid: word `k` plays `sequence[k]` over
/// `[beat_k, beat_{k+1})`. Frames outside the beat span hold the rest pose.
pub fn render_dance(prototypes: &[&MovementPrototype], grid: &BeatGrid) -> Clip {
    let skel = biped();
    let j = skel.joint_count();
    let mut frames = vec![Pose::identity(j); grid.frame_count()];
    for (k, w) in grid.beat_frames.windows(2).enumerate() {
        let poses = prototypes[k].render(j, w[1] - w[0]);
        frames.splice(w[0]..w[1], poses);
    }
    let h = grounded_height(&skel, &Pose::identity(j));
    let mut clip = MotionClip::new(skel, frames, grid.fps);
    clip.root_origin = Vec3::new(0.0, h, 0.0);
    clip
}

pub fn synthetic_corpus(cfg: &SyntheticCorpusConfig, seed: u64) -> SyntheticCorpus {
    let skel = biped();
    let mut r = rng::seeded(seed);
    let prototypes: Vec<MovementPrototype> = (0..cfg.prototypes).map(|_| MovementPrototype::random(&skel, &mut r)).collect();
    let chain = random_chain(cfg.prototypes, cfg.successors, &mut r);
    let contact_cfg = ContactConfig::for_skeleton(&skel);
    let dances = (0..cfg.dances)
        .map(|d| {
            let beats = r.random_range(cfg.beats_per_dance.0..=cfg.beats_per_dance.1);
            let bpm = r.random_range(cfg.bpm.0..=cfg.bpm.1);
            let period = 30.0 * 60.0 / bpm;
            let frames = (beats as f64 * period).round() as usize + 1;
            let grid = synth_beat_grid(bpm, 30.0, frames, r.random()).expect("valid grid");
            let words = grid.interval_count();
            let labels = walk_chain(&chain, r.random_range(0..cfg.prototypes), words, &mut r);
            let jittered: Vec<MovementPrototype> = labels.iter().map(|&l| prototypes[l].jittered(cfg.jitter, &mut r)).collect();
            let refs: Vec<&MovementPrototype> = jittered.iter().collect();
            let clip = render_dance(&refs, &grid);
            let contacts = detect_foot_contacts(&clip, &contact_cfg).expect("biped has feet");
            let entry = CorpusEntry::new(format!("dance_{d:03}"), cfg.genre.clone(), clip, contacts, grid).expect("consistent entry");
            SyntheticDance { entry, labels }
        })
        .collect();
    SyntheticCorpus { prototypes, chain, dances }
}
