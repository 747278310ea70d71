//! Batched losses, backpropagation through time and Adam.

use std::ops::ControlFlow;

use choreo_core::motif::EmbeddingBasis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{TrainSequence, Window};
use crate::error::{NeuralError, Result};
use crate::grad::geodesic_sq;
use crate::loss::{frame_loss, loss_perceptual, quat_at, total_loss, TermWeights};
use crate::net::{Mat, Params, PoseNet, StepCache};

/// Sequences plus the embedding used by the perceptual term. Without a basis
/// the perceptual term is omitted.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub sequences: &'a [TrainSequence],
    pub basis: Option<&'a EmbeddingBasis>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub coherence: f64,
    pub autoconditioned: f64,
    pub perceptual: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.coherence.is_finite() && self.autoconditioned.is_finite() && self.perceptual.is_finite() && self.total.is_finite()
    }
}

/// Forward pass over a batch of windows.
pub(crate) struct Run {
    pub steps: Vec<StepCache>,
    pub fed_back: Vec<bool>,
}

/// Runs the windows through the net. With `teacher_forced` every step sees
/// the true previous frame; otherwise the config's schedule decides.
pub(crate) fn run_windows(net: &PoseNet, data: &TrainData, windows: &[Window], teacher_forced: bool) -> Run {
    let len = windows[0].len;
    let b = windows.len();
    let steps = len - 1;
    let pd = net.dims.pose();
    let mut state = net.initial_state(b);
    let mut caches: Vec<StepCache> = Vec::with_capacity(steps);
    let mut fed_back = Vec::with_capacity(steps);
    for t in 0..steps {
        let gt = teacher_forced || net.config.fed_ground_truth(t);
        let mut x = Mat::zeros(net.dims.input(), b);
        for (c, w) in windows.iter().enumerate() {
            let seq = &data.sequences[w.sequence];
            let f = w.start + t;
            let col = if gt {
                seq.input(f, &seq.frames[f].pose, seq.frames[f].contacts)
            } else {
                let prev = &caches[t - 1].out;
                let block: Vec<f64> = prev.column(c).iter().copied().collect();
                seq.input(f, &block[..pd], [block[pd], block[pd + 1]])
            };
            x.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        fed_back.push(!gt);
        caches.push(net.step(&mut state, x));
    }
    Run { steps: caches, fed_back }
}

struct RunLoss {
    value: f64,
    g_out: Vec<Mat>,
    g_logit: Vec<Mat>,
}

/// Mean coherence metric over steps and windows.
fn coherence_over(net: &PoseNet, data: &TrainData, windows: &[Window], run: &Run) -> RunLoss {
    let w = TermWeights::from_config(&net.config);
    let b = windows.len();
    let steps = run.steps.len();
    let scale = 1.0 / (steps * b) as f64;
    let pd = net.dims.pose();
    let mut value = 0.0;
    let mut g_out = Vec::with_capacity(steps);
    let mut g_logit = Vec::with_capacity(steps);
    for (t, cache) in run.steps.iter().enumerate() {
        let mut go = Mat::zeros(net.dims.output(), b);
        let mut gl = Mat::zeros(2, b);
        for (c, win) in windows.iter().enumerate() {
            let seq = &data.sequences[win.sequence];
            let f = win.start + t + 1;
            let pose: Vec<f64> = cache.out.column(c).rows(0, pd).iter().copied().collect();
            let logits = [cache.raw[(pd, c)], cache.raw[(pd + 1, c)]];
            let fl = frame_loss(&net.skeleton, &pose, logits, &seq.frames[f], &seq.points[f], w);
            value += fl.value * scale;
            for (r, g) in fl.g_pose.iter().enumerate() {
                go[(r, c)] = g * scale;
            }
            gl[(0, c)] = fl.g_logit[0] * scale;
            gl[(1, c)] = fl.g_logit[1] * scale;
        }
        g_out.push(go);
        g_logit.push(gl);
    }
    RunLoss { value, g_out, g_logit }
}

/// Mean perceptual loss over the complete words inside each window, averaged
/// over windows. Adds `lambda` times its gradient into `g_out` unless
/// `lambda` is zero.
fn perceptual_over(
    net: &PoseNet,
    data: &TrainData,
    basis: &EmbeddingBasis,
    windows: &[Window],
    run: &Run,
    lambda: f64,
    g_out: &mut [Mat],
) -> Result<f64> {
    let b = windows.len();
    let pd = net.dims.pose();
    let mut value = 0.0;
    for (c, win) in windows.iter().enumerate() {
        let seq = &data.sequences[win.sequence];
        let words: Vec<_> = seq
            .words
            .iter()
            .filter(|w| w.span.0 > win.start && w.span.1 <= win.start + win.len && w.span.1 - w.span.0 >= 2)
            .collect();
        if words.is_empty() {
            continue;
        }
        let scale = 1.0 / (words.len() * b) as f64;
        for w in words {
            let steps: Vec<usize> = (w.span.0..w.span.1).map(|f| f - win.start - 1).collect();
            let poses: Vec<Vec<f64>> =
                steps.iter().map(|&t| run.steps[t].out.column(c).rows(0, pd).iter().copied().collect()).collect();
            let refs: Vec<&[f64]> = poses.iter().map(|p| p.as_slice()).collect();
            let (v, grads) = loss_perceptual(&refs, &w.motif, basis)?;
            value += v * scale;
            if lambda != 0.0 {
                for (&t, g) in steps.iter().zip(&grads) {
                    for (r, gv) in g.iter().enumerate() {
                        g_out[t][(r, c)] += lambda * scale * gv;
                    }
                }
            }
        }
    }
    Ok(value)
}

fn check_windows(net: &PoseNet, data: &TrainData, windows: &[Window]) -> Result<()> {
    let Some(first) = windows.first() else {
        return Err(NeuralError::Data("empty batch".into()));
    };
    if first.len < 2 {
        return Err(NeuralError::Data("windows need at least 2 frames".into()));
    }
    for w in windows {
        let seq = data
            .sequences
            .get(w.sequence)
            .ok_or_else(|| NeuralError::Data(format!("sequence {} does not exist", w.sequence)))?;
        if w.len != first.len || w.start + w.len > seq.len() {
            return Err(NeuralError::Data(format!("window {w:?} does not fit")));
        }
        if seq.motif_dim() != net.dims.motif_dim {
            return Err(NeuralError::Dimension(format!(
                "sequence motif dimension {} but net expects {}",
                seq.motif_dim(),
                net.dims.motif_dim
            )));
        }
    }
    if let Some(basis) = data.basis {
        if basis.dim() != net.dims.motif_dim || basis.joint_count != net.dims.joints {
            return Err(NeuralError::Dimension("embedding basis does not match the net".into()));
        }
    }
    Ok(())
}

/// Loss on a batch of windows and, optionally, its gradient.
///
/// The coherence term uses a teacher-forced pass; the auto-conditioned and
/// perceptual terms use a pass following the config's schedule.
pub fn batch_loss(net: &PoseNet, data: &TrainData, windows: &[Window], with_grad: bool) -> Result<(LossBreakdown, Option<Params>)> {
    check_windows(net, data, windows)?;
    let lambda = net.config.lambda;
    let tf = run_windows(net, data, windows, true);
    let coh = coherence_over(net, data, windows, &tf);
    let sched = run_windows(net, data, windows, false);
    let mut ac = coherence_over(net, data, windows, &sched);
    let perceptual = match data.basis {
        Some(basis) => perceptual_over(net, data, basis, windows, &sched, lambda, &mut ac.g_out)?,
        None => 0.0,
    };
    let loss = LossBreakdown {
        coherence: coh.value,
        autoconditioned: ac.value,
        perceptual,
        total: total_loss(coh.value, ac.value, perceptual, lambda),
    };
    if !with_grad {
        return Ok((loss, None));
    }
    let mut grads = net.backward(&tf.steps, &tf.fed_back, &coh.g_out, &coh.g_logit);
    let g2 = net.backward(&sched.steps, &sched.fed_back, &ac.g_out, &ac.g_logit);
    grads.add_scaled(&g2, 1.0);
    Ok((loss, Some(grads)))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    pub fn new(params: &Params) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64, b1: f64, b2: f64, eps: f64) {
        self.t += 1;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((p, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(self.m.tensors.iter_mut().zip(self.v.tensors.iter_mut()))
        {
            for (((p, g), m), v) in p.value.iter_mut().zip(g.value.iter()).zip(m.value.iter_mut()).zip(v.value.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<CurvePoint>,
    pub iterations: usize,
}

impl TrainReport {
    /// `iteration,total,coherence,autoconditioned,perceptual`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,total,coherence,autoconditioned,perceptual\n");
        for p in &self.curve {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.iteration, p.loss.total, p.loss.coherence, p.loss.autoconditioned, p.loss.perceptual
            ));
        }
        s
    }
}

/// Windows for one iteration: a uniformly chosen sequence and start per slot.
pub fn sample_windows(data: &TrainData, window: usize, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Window>> {
    let usable: Vec<usize> = (0..data.sequences.len()).filter(|&i| data.sequences[i].len() >= window).collect();
    if usable.is_empty() {
        return Err(NeuralError::Data(format!("no sequence has {window} frames")));
    }
    Ok((0..batch)
        .map(|_| {
            let sequence = usable[rng.random_range(0..usable.len())];
            let start = rng.random_range(0..=data.sequences[sequence].len() - window);
            Window { sequence, start, len: window }
        })
        .collect())
}

/// Trains in place. `on_step` sees every iteration's loss and may stop
/// training early. On a non-finite loss or gradient the weights are left at
/// the last finite state and [`NeuralError::Diverged`] is returned.
pub fn train_with(
    net: &mut PoseNet,
    data: &TrainData,
    options: &TrainOptions,
    mut on_step: impl FnMut(usize, &PoseNet, &LossBreakdown) -> ControlFlow<()>,
) -> Result<TrainReport> {
    let cfg = net.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut adam = Adam::new(&net.params);
    let mut report = TrainReport::default();
    for it in 0..options.iterations {
        let windows = sample_windows(data, cfg.window, cfg.batch, &mut rng)?;
        let (loss, grads) = batch_loss(net, data, &windows, true)?;
        let mut grads = grads.expect("gradient requested");
        if !loss.is_finite() || !grads.is_finite() {
            return Err(NeuralError::Diverged { iteration: it });
        }
        if cfg.clip_norm > 0.0 {
            let n = grads.norm();
            if n > cfg.clip_norm {
                grads.scale(cfg.clip_norm / n);
            }
        }
        let before = net.params.clone();
        adam.step(&mut net.params, &grads, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        if !net.params.is_finite() {
            net.params = before;
            return Err(NeuralError::Diverged { iteration: it });
        }
        report.curve.push(CurvePoint { iteration: it, loss });
        report.iterations = it + 1;
        if on_step(it, net, &loss).is_break() {
            break;
        }
    }
    Ok(report)
}

pub fn train(net: &mut PoseNet, data: &TrainData, options: &TrainOptions) -> Result<TrainReport> {
    train_with(net, data, options, |_, _, _| ControlFlow::Continue(()))
}

/// Mean per-joint rotation error in radians of teacher-forced one-step
/// predictions over a whole sequence.
pub fn teacher_forced_error(net: &PoseNet, data: &TrainData, sequence: usize) -> Result<f64> {
    let seq = data
        .sequences
        .get(sequence)
        .ok_or_else(|| NeuralError::Data(format!("sequence {sequence} does not exist")))?;
    let windows = [Window { sequence, start: 0, len: seq.len() }];
    check_windows(net, data, &windows)?;
    let run = run_windows(net, data, &windows, true);
    let pd = net.dims.pose();
    let j = net.dims.joints;
    let mut sum = 0.0;
    for (t, cache) in run.steps.iter().enumerate() {
        let pose: Vec<f64> = cache.out.column(0).rows(0, pd).iter().copied().collect();
        let truth = &seq.frames[t + 1];
        for k in 0..j {
            sum += 2.0 * geodesic_sq(quat_at(&pose, k), truth.quat(k)).0.sqrt();
        }
    }
    Ok(sum / (run.steps.len() * j) as f64)
}

/// Exponential moving average of a loss curve.
pub fn ema(values: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let a = match acc {
            None => v,
            Some(p) => alpha * v + (1.0 - alpha) * p,
        };
        acc = Some(a);
        out.push(a);
    }
    out
}
