//! Stacked LSTM with a linear head, batched over columns.

use std::sync::Arc;

use choreo_core::Skeleton;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{NetConfig, RHYTHMIC_DIM};
use crate::error::{NeuralError, Result};
use crate::grad::{normalize, normalize_back, sigmoid};

pub type Mat = DMatrix<f64>;

/// Sizes derived from the skeleton and motif space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub motif_dim: usize,
    pub joints: usize,
}

impl Dims {
    pub fn pose(&self) -> usize {
        3 + 4 * self.joints
    }

    pub fn input(&self) -> usize {
        NetConfig::input_dim(self.motif_dim, self.joints)
    }

    pub fn output(&self) -> usize {
        NetConfig::output_dim(self.joints)
    }

    /// Row where the fed-back pose block starts in the input.
    pub fn feedback_offset(&self) -> usize {
        RHYTHMIC_DIM + self.motif_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub value: Mat,
}

/// All trainable tensors. Layer `l` owns `lstm{l}.wx`, `lstm{l}.wh` and
/// `lstm{l}.b` (gate rows ordered input, forget, candidate, output); the head
/// owns `head.w` and `head.b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tensors: Vec<Tensor>,
}

impl Params {
    pub fn zeros(config: &NetConfig, dims: Dims) -> Self {
        let h = config.hidden;
        let mut tensors = Vec::with_capacity(3 * config.layers + 2);
        for l in 0..config.layers {
            let input = if l == 0 { dims.input() } else { h };
            tensors.push(Tensor { name: format!("lstm{l}.wx"), value: Mat::zeros(4 * h, input) });
            tensors.push(Tensor { name: format!("lstm{l}.wh"), value: Mat::zeros(4 * h, h) });
            tensors.push(Tensor { name: format!("lstm{l}.b"), value: Mat::zeros(4 * h, 1) });
        }
        tensors.push(Tensor { name: "head.w".into(), value: Mat::zeros(dims.output(), h) });
        tensors.push(Tensor { name: "head.b".into(), value: Mat::zeros(dims.output(), 1) });
        Self { tensors }
    }

    /// Uniform `±1/sqrt(hidden)` initialization with forget-gate bias 1.
    pub fn init(config: &NetConfig, dims: Dims, seed: u64) -> Self {
        let mut p = Self::zeros(config, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (config.hidden as f64).sqrt();
        for t in &mut p.tensors {
            for v in t.value.iter_mut() {
                *v = rng.random_range(-k..k);
            }
        }
        let h = config.hidden;
        for l in 0..config.layers {
            for r in h..2 * h {
                p.tensors[3 * l + 2].value[(r, 0)] += 1.0;
            }
        }
        p
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor { name: t.name.clone(), value: Mat::zeros(t.value.nrows(), t.value.ncols()) })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.value.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.value *= s;
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Params, s: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.value.zip_apply(&b.value, |x, y| *x += s * y);
        }
    }

    fn layer(&self, l: usize) -> (&Mat, &Mat, &Mat) {
        (&self.tensors[3 * l].value, &self.tensors[3 * l + 1].value, &self.tensors[3 * l + 2].value)
    }

    fn head(&self) -> (&Mat, &Mat) {
        let n = self.tensors.len();
        (&self.tensors[n - 2].value, &self.tensors[n - 1].value)
    }
}

/// Per-layer hidden and cell state, one column per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Mat>,
    pub c: Vec<Mat>,
}

impl LstmState {
    pub fn zeros(config: &NetConfig, batch: usize) -> Self {
        Self {
            h: vec![Mat::zeros(config.hidden, batch); config.layers],
            c: vec![Mat::zeros(config.hidden, batch); config.layers],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    x: Mat,
    h_prev: Mat,
    c_prev: Mat,
    i: Mat,
    f: Mat,
    g: Mat,
    o: Mat,
    tc: Mat,
}

/// Forward intermediates of one step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    layers: Vec<LayerCache>,
    /// Head output.
    pub raw: Mat,
    /// Head output plus the residual pose, before normalization and sigmoid.
    pub pre: Mat,
    /// Normalized pose block followed by contact probabilities.
    pub out: Mat,
}

/// Result of a single unbatched step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// `3 + 4J` values with unit quaternions.
    pub pose: Vec<f64>,
    /// Contact probabilities.
    pub contacts: [f64; 2],
    /// Head output before post-processing.
    pub raw: Vec<f64>,
}

impl StepOutput {
    pub fn contact_labels(&self) -> [u8; 2] {
        [(self.contacts[0] >= 0.5) as u8, (self.contacts[1] >= 0.5) as u8]
    }
}

/// The pose generator `R`.
#[derive(Debug, Clone)]
pub struct PoseNet {
    pub config: NetConfig,
    pub dims: Dims,
    pub skeleton: Arc<Skeleton>,
    pub params: Params,
}

impl PoseNet {
    pub fn new(config: NetConfig, skeleton: Arc<Skeleton>, motif_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let dims = Dims { motif_dim, joints: skeleton.joint_count() };
        let params = Params::init(&config, dims, seed);
        Ok(Self { config, dims, skeleton, params })
    }

    pub fn with_params(config: NetConfig, skeleton: Arc<Skeleton>, motif_dim: usize, params: Params) -> Result<Self> {
        config.validate()?;
        let dims = Dims { motif_dim, joints: skeleton.joint_count() };
        let expected = Params::zeros(&config, dims);
        if expected.tensors.len() != params.tensors.len()
            || expected.tensors.iter().zip(&params.tensors).any(|(a, b)| {
                a.name != b.name || a.value.shape() != b.value.shape()
            })
        {
            return Err(NeuralError::Dimension("parameter tensors do not match the config".into()));
        }
        Ok(Self { config, dims, skeleton, params })
    }

    pub fn initial_state(&self, batch: usize) -> LstmState {
        LstmState::zeros(&self.config, batch)
    }

    /// One unbatched step on input `n^t`.
    pub fn forward_step(&self, state: &LstmState, input: &[f64]) -> Result<(StepOutput, LstmState)> {
        if input.len() != self.dims.input() {
            return Err(NeuralError::Dimension(format!(
                "input has {} values, expected {}",
                input.len(),
                self.dims.input()
            )));
        }
        if state.h.first().map_or(true, |h| h.ncols() != 1) {
            return Err(NeuralError::Dimension("state must have one column".into()));
        }
        let mut next = state.clone();
        let cache = self.step(&mut next, Mat::from_column_slice(input.len(), 1, input));
        let p = self.dims.pose();
        let out = cache.out.column(0);
        Ok((
            StepOutput {
                pose: out.rows(0, p).iter().copied().collect(),
                contacts: [out[p], out[p + 1]],
                raw: cache.raw.column(0).iter().copied().collect(),
            },
            next,
        ))
    }

    pub(crate) fn step(&self, state: &mut LstmState, x: Mat) -> StepCache {
        let h = self.config.hidden;
        let mut layers = Vec::with_capacity(self.config.layers);
        let mut input = x;
        for l in 0..self.config.layers {
            let (wx, wh, b) = self.params.layer(l);
            let mut z = wx * &input + wh * &state.h[l];
            for mut col in z.column_iter_mut() {
                col += b.column(0);
            }
            let i = z.rows(0, h).map(sigmoid);
            let f = z.rows(h, h).map(sigmoid);
            let g = z.rows(2 * h, h).map(f64::tanh);
            let o = z.rows(3 * h, h).map(sigmoid);
            let c = f.component_mul(&state.c[l]) + i.component_mul(&g);
            let tc = c.map(f64::tanh);
            let hn = o.component_mul(&tc);
            let h_prev = std::mem::replace(&mut state.h[l], hn.clone());
            let c_prev = std::mem::replace(&mut state.c[l], c);
            layers.push(LayerCache { x: input, h_prev, c_prev, i, f, g, o, tc });
            input = hn;
        }
        let (w, b) = self.params.head();
        let mut raw = w * &input;
        for mut col in raw.column_iter_mut() {
            col += b.column(0);
        }
        let mut pre = raw.clone();
        if self.config.residual {
            let p = self.dims.pose();
            let skip = layers[0].x.rows(self.dims.feedback_offset(), p);
            pre.rows_mut(0, p).zip_apply(&skip, |a, s| *a += s);
        }
        let out = self.post(&pre);
        StepCache { layers, raw, pre, out }
    }

    fn post(&self, raw: &Mat) -> Mat {
        let mut out = raw.clone();
        let p = self.dims.pose();
        for mut col in out.column_iter_mut() {
            for j in 0..self.dims.joints {
                let r = 3 + 4 * j;
                let (q, _) = normalize([col[r], col[r + 1], col[r + 2], col[r + 3]]);
                for k in 0..4 {
                    col[r + k] = q[k];
                }
            }
            col[p] = sigmoid(col[p]);
            col[p + 1] = sigmoid(col[p + 1]);
        }
        out
    }

    /// Gradient on the head output given gradients on the post-processed
    /// output (`g_out`) and directly on the contact logits (`g_logit`, 2 rows).
    fn post_back(&self, cache: &StepCache, g_out: &Mat, g_logit: &Mat) -> Mat {
        let p = self.dims.pose();
        let mut g = g_out.clone();
        for b in 0..g.ncols() {
            for j in 0..self.dims.joints {
                let r = 3 + 4 * j;
                let raw = [cache.pre[(r, b)], cache.pre[(r + 1, b)], cache.pre[(r + 2, b)], cache.pre[(r + 3, b)]];
                let (q, n) = normalize(raw);
                let gq = normalize_back(q, n, [g[(r, b)], g[(r + 1, b)], g[(r + 2, b)], g[(r + 3, b)]]);
                for k in 0..4 {
                    g[(r + k, b)] = gq[k];
                }
            }
            for k in 0..2 {
                let s = cache.out[(p + k, b)];
                g[(p + k, b)] = g[(p + k, b)] * s * (1.0 - s) + g_logit[(k, b)];
            }
        }
        g
    }

    /// Backpropagation through time over `steps`.
    ///
    /// `g_out[t]` and `g_logit[t]` are the loss gradients on step `t`'s output.
    /// `fed_back[t]` says whether step `t`'s input pose block was the previous
    /// step's output, in which case the input gradient flows back into it.
    pub(crate) fn backward(&self, steps: &[StepCache], fed_back: &[bool], g_out: &[Mat], g_logit: &[Mat]) -> Params {
        let mut grads = self.params.zeros_like();
        let Some(first) = steps.first() else {
            return grads;
        };
        let hsz = self.config.hidden;
        let layers = self.config.layers;
        let batch = first.out.ncols();
        let mut dh_next = vec![Mat::zeros(hsz, batch); layers];
        let mut dc_next = vec![Mat::zeros(hsz, batch); layers];
        let mut carry: Option<Mat> = None;
        let nt = grads.tensors.len();
        let fb = self.dims.feedback_offset();
        let out_dim = self.dims.output();
        for t in (0..steps.len()).rev() {
            let cache = &steps[t];
            let mut g = g_out[t].clone();
            if let Some(c) = carry.take() {
                g += c;
            }
            let g_raw = self.post_back(cache, &g, &g_logit[t]);
            let top = &cache.layers[layers - 1];
            let h_top = top.o.component_mul(&top.tc);
            grads.tensors[nt - 2].value.gemm(1.0, &g_raw, &h_top.transpose(), 1.0);
            grads.tensors[nt - 1].value += g_raw.column_sum();
            let mut dh_in = self.params.head().0.transpose() * &g_raw;
            for l in (0..layers).rev() {
                let lc = &cache.layers[l];
                let dh = &dh_in + &dh_next[l];
                let d_o = dh.component_mul(&lc.tc);
                let dc = &dc_next[l] + dh.component_mul(&lc.o).component_mul(&lc.tc.map(|v| 1.0 - v * v));
                let mut dz = Mat::zeros(4 * hsz, batch);
                dz.rows_mut(0, hsz).copy_from(&dc.component_mul(&lc.g).component_mul(&lc.i.map(|v| v * (1.0 - v))));
                dz.rows_mut(hsz, hsz)
                    .copy_from(&dc.component_mul(&lc.c_prev).component_mul(&lc.f.map(|v| v * (1.0 - v))));
                dz.rows_mut(2 * hsz, hsz).copy_from(&dc.component_mul(&lc.i).component_mul(&lc.g.map(|v| 1.0 - v * v)));
                dz.rows_mut(3 * hsz, hsz).copy_from(&d_o.component_mul(&lc.o.map(|v| v * (1.0 - v))));
                dc_next[l] = dc.component_mul(&lc.f);
                let (wx, wh, _) = self.params.layer(l);
                grads.tensors[3 * l].value.gemm(1.0, &dz, &lc.x.transpose(), 1.0);
                grads.tensors[3 * l + 1].value.gemm(1.0, &dz, &lc.h_prev.transpose(), 1.0);
                grads.tensors[3 * l + 2].value += dz.column_sum();
                dh_next[l] = wh.transpose() * &dz;
                dh_in = wx.transpose() * &dz;
            }
            if t > 0 && fed_back[t] {
                let mut c = dh_in.rows(fb, out_dim).into_owned();
                if self.config.residual {
                    let p = self.dims.pose();
                    c.rows_mut(0, p).zip_apply(&g_raw.rows(0, p), |a, g| *a += g);
                }
                carry = Some(c);
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use choreo_core::synthetic::biped;

    fn tiny() -> PoseNet {
        let cfg = NetConfig { hidden: 6, layers: 2, ..Default::default() };
        PoseNet::new(cfg, biped(), 3, 7).unwrap()
    }

    #[test]
    fn zero_weights_give_head_bias() {
        let mut net = tiny();
        let n = net.params.tensors.len();
        for t in &mut net.params.tensors {
            t.value.fill(0.0);
        }
        for (r, v) in net.params.tensors[n - 1].value.iter_mut().enumerate() {
            *v = r as f64 * 0.1 - 2.0;
        }
        let input: Vec<f64> = (0..net.dims.input()).map(|i| (i as f64).sin()).collect();
        let (out, state) = net.forward_step(&net.initial_state(1), &input).unwrap();
        let bias: Vec<f64> = net.params.tensors[n - 1].value.iter().copied().collect();
        assert_eq!(out.raw, bias);
        // c = 0.5 * 0 + 0.5 * tanh(0) = 0, h = 0.5 * tanh(0) = 0
        assert!(state.h.iter().chain(&state.c).all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn deterministic_and_unit_quaternions() {
        let net = tiny();
        let input: Vec<f64> = (0..net.dims.input()).map(|i| (i as f64 * 0.37).cos()).collect();
        let s = net.initial_state(1);
        let (a, sa) = net.forward_step(&s, &input).unwrap();
        let (b, sb) = net.forward_step(&s, &input).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        for q in a.pose[3..].chunks(4) {
            assert!((q.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        }
        assert!(a.contacts.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn rejects_wrong_input_size() {
        let net = tiny();
        assert!(net.forward_step(&net.initial_state(1), &[0.0; 3]).is_err());
    }

    #[test]
    fn batched_columns_match_single_steps() {
        let net = tiny();
        let d = net.dims.input();
        let x = Mat::from_fn(d, 3, |r, c| ((r * 3 + c) as f64 * 0.11).sin());
        let mut state = net.initial_state(3);
        let cache = net.step(&mut state, x.clone());
        for c in 0..3 {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let (o, _) = net.forward_step(&net.initial_state(1), &col).unwrap();
            let batched: Vec<f64> = cache.raw.column(c).iter().copied().collect();
            for (a, b) in o.raw.iter().zip(&batched) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
