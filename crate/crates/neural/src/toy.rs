//! Small deterministic skeleton, data and nets for checks and tests.

use std::sync::Arc;

use choreo_core::motif::EmbeddingBasis;
use choreo_core::motion::{Channel, EndSite, Joint};
use choreo_core::quat::{Quaternion, Vec3};
use choreo_core::Skeleton;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::NetConfig;
use crate::data::{TrainSequence, WordTarget};
use crate::loss::Frame;
use crate::net::PoseNet;

pub const TOY_MOTIF_DIM: usize = 3;

/// Four-joint chain with unit-scale bones and one end site.
pub fn toy_skeleton() -> Arc<Skeleton> {
    let rot = vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation];
    let mut root_ch = vec![Channel::Xposition, Channel::Yposition, Channel::Zposition];
    root_ch.extend(rot.iter().copied());
    let j = |name: &str, parent: Option<usize>, o: [f64; 3], channels: Vec<Channel>| Joint {
        name: name.into(),
        parent,
        offset: Vec3::new(o[0], o[1], o[2]),
        channels,
    };
    let joints = vec![
        j("root", None, [0.0, 0.0, 0.0], root_ch),
        j("a", Some(0), [0.0, 0.3, 0.0], rot.clone()),
        j("b", Some(1), [0.25, 0.0, 0.0], rot.clone()),
        j("c", Some(1), [0.0, -0.3, 0.1], rot),
    ];
    let ends = vec![EndSite { name: "c_End".into(), parent: 3, offset: Vec3::new(0.0, 0.0, 0.2) }];
    Arc::new(Skeleton::new(joints, ends).expect("valid toy skeleton"))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// Random orthonormal embedding for the toy skeleton.
pub fn toy_basis(seed: u64) -> EmbeddingBasis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let joints = toy_skeleton().joint_count();
    let word_frames = 13;
    let n = word_frames * (3 + 4 * joints);
    let mut components: Vec<Vec<f64>> = Vec::new();
    while components.len() < TOY_MOTIF_DIM {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &components {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
        }
        components.push(unit(v));
    }
    let mean = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
    EmbeddingBasis { word_frames, joint_count: joints, mean, components }
}

/// Two smooth random sequences of 24 frames with words every 4 or 5 frames.
pub fn toy_data(seed: u64) -> (Vec<TrainSequence>, EmbeddingBasis) {
    let skel = toy_skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seqs = Vec::new();
    for _ in 0..2 {
        let n = 24;
        let joints = skel.joint_count();
        let axes: Vec<Vec3<f64>> = (0..joints)
            .map(|_| {
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    .normalized()
                    .unwrap_or(Vec3::new(0.0, 1.0, 0.0))
            })
            .collect();
        let phase: Vec<f64> = (0..joints).map(|_| rng.random_range(0.0..6.0)).collect();
        let mut beats = vec![0usize];
        while *beats.last().unwrap() + 5 < n {
            let gap = rng.random_range(4..=5);
            beats.push(beats.last().unwrap() + gap);
        }
        let words: Vec<WordTarget> = beats
            .windows(2)
            .map(|w| WordTarget {
                span: (w[0], w[1]),
                motif: unit((0..TOY_MOTIF_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()),
            })
            .collect();
        let mut frames = Vec::with_capacity(n);
        let mut rhythmic = Vec::with_capacity(n);
        let mut motif = Vec::with_capacity(n);
        for t in 0..n {
            let mut pose = vec![0.02 * (t as f64 * 0.3).sin(), 0.01, 0.015 * (t as f64 * 0.2).cos()];
            for j in 0..joints {
                let angle = 0.8 * (0.25 * t as f64 + phase[j]).sin();
                pose.extend_from_slice(&Quaternion::from_axis_angle(axes[j], angle).to_array());
            }
            frames.push(Frame { pose, contacts: [((t / 3) % 2) as f64, ((t / 5) % 2) as f64] });
            let beat = beats.contains(&t);
            rhythmic.push([rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.5, if beat { 1.0 } else { 0.0 }]);
            let k = words.partition_point(|w| w.span.1 <= t).min(words.len() - 1);
            motif.push(words[k].motif.clone());
        }
        seqs.push(TrainSequence::new(&skel, rhythmic, motif, frames, words).expect("valid toy sequence"));
    }
    (seqs, toy_basis(seed))
}

/// Hidden 8, three layers, 11-frame windows, batch 2, schedule 2/2.
pub fn toy_config() -> NetConfig {
    NetConfig { hidden: 8, window: 11, batch: 2, gt_len: 2, self_len: 2, ..Default::default() }
}

pub fn toy_net(config: NetConfig, seed: u64) -> PoseNet {
    PoseNet::new(config, toy_skeleton(), TOY_MOTIF_DIM, seed).expect("valid toy config")
}

/// One 200-frame dance from a small synthetic corpus, labelled against a
/// motif table clustered from the rest of that corpus.
pub fn overfit_sequence(seed: u64) -> crate::error::Result<(TrainSequence, choreo_core::motif::MotifTable)> {
    use choreo_core::audio::BeatGrid;
    use choreo_core::motif::{build_library, ClusterConfig};
    use choreo_core::synthetic::{synthetic_corpus, SyntheticCorpusConfig};

    let frames = 200;
    let corpus = synthetic_corpus(
        &SyntheticCorpusConfig { prototypes: 6, dances: 4, beats_per_dance: (20, 24), ..Default::default() },
        seed,
    );
    let entries = corpus.entries();
    let lib = build_library(&entries, &ClusterConfig { k: 6, dim: 8, seed, ..Default::default() })?;
    let e = &entries[0];
    let beats: Vec<usize> = e.beats.beat_frames.iter().copied().filter(|&b| b < frames).collect();
    let grid = BeatGrid::new(
        e.beats.fps,
        beats.clone(),
        e.beats.rhythmic[..frames].to_vec(),
        e.beats.spectral[..beats.len() - 1].to_vec(),
    )?;
    let clip = e.clip.slice(0, frames);
    let contacts = e.contacts.slice(0, frames);
    Ok((TrainSequence::from_clip(&clip, &contacts, &grid, &lib.table)?, lib.table))
}

/// Settings for [`overfit_sequence`]: default three-layer net of width 64,
/// 30-frame windows, batch 16, learning rate 3e-3 and the position term
/// scaled down to 0.01 so the rotation term is not swamped by positions in
/// centimetres.
pub fn overfit_config() -> NetConfig {
    NetConfig { window: 30, batch: 16, learning_rate: 3e-3, position_weight: 0.01, ..Default::default() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverfitReport {
    pub iterations: usize,
    pub seconds: f64,
    /// Mean per-joint angle error of a teacher-forced pass, radians.
    pub error: f64,
}

/// Trains on [`overfit_sequence`] until the teacher-forced error drops below
/// `target` or `budget` runs out, checking every `check_every` iterations.
pub fn overfit_run(
    seed: u64,
    target: f64,
    budget: std::time::Duration,
    check_every: usize,
) -> crate::error::Result<OverfitReport> {
    use std::ops::ControlFlow;
    use std::time::Instant;

    use crate::train::{teacher_forced_error, train_with, TrainData, TrainOptions};

    let (seq, table) = overfit_sequence(seed)?;
    let seqs = vec![seq];
    let data = TrainData { sequences: &seqs, basis: Some(&table.basis) };
    let mut net = PoseNet::new(overfit_config(), table.skeleton.clone(), table.dim(), seed)?;
    let start = Instant::now();
    let mut error = teacher_forced_error(&net, &data, 0)?;
    let mut failure = None;
    let report = train_with(&mut net, &data, &TrainOptions { iterations: usize::MAX, seed }, |it, net, _| {
        if (it + 1) % check_every.max(1) != 0 {
            return ControlFlow::Continue(());
        }
        match teacher_forced_error(net, &data, 0) {
            Ok(e) => error = e,
            Err(e) => {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        if error < target || start.elapsed() >= budget {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(OverfitReport { iterations: report.iterations, seconds: start.elapsed().as_secs_f64(), error })
}
