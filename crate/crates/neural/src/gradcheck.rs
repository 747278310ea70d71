//! Analytic gradients against five-point central differences.

use serde::{Deserialize, Serialize};

use crate::config::NetConfig;
use crate::data::Window;
use crate::error::Result;
use crate::toy::{toy_data, toy_net};
use crate::train::{batch_loss, TrainData};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Denominator floor of the relative error. The stencil at `FD_STEP`
/// resolves about 1e-11 absolute on losses of order ten, so gradients below
/// this floor are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub count: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub parameters: usize,
    pub tensors: Vec<TensorCheck>,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks every parameter of a tiny net (hidden 8, 10 steps, two windows)
/// on the toy skeleton. The loss weights, lambda and schedule come from
/// `config`; sizes are overridden.
pub fn gradient_check(config: &NetConfig, seed: u64) -> Result<GradCheckReport> {
    let cfg = NetConfig { hidden: 8, window: 11, batch: 2, ..config.clone() };
    let (seqs, basis) = toy_data(seed);
    let data = TrainData { sequences: &seqs, basis: Some(&basis) };
    let windows = [Window { sequence: 0, start: 0, len: 11 }, Window { sequence: 1, start: 7, len: 11 }];
    let mut net = toy_net(cfg, seed);
    let (_, grads) = batch_loss(&net, &data, &windows, true)?;
    let grads = grads.expect("gradient requested");
    let mut tensors = Vec::with_capacity(grads.tensors.len());
    let mut parameters = 0;
    for ti in 0..net.params.tensors.len() {
        let mut worst: f64 = 0.0;
        let count = net.params.tensors[ti].value.len();
        for k in 0..count {
            let orig = net.params.tensors[ti].value[k];
            let mut at = |h: f64| {
                net.params.tensors[ti].value[k] = orig + h;
                batch_loss(&net, &data, &windows, false).map(|r| r.0.total)
            };
            let (p1, m1, p2, m2) = (at(FD_STEP)?, at(-FD_STEP)?, at(2.0 * FD_STEP)?, at(-2.0 * FD_STEP)?);
            net.params.tensors[ti].value[k] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * FD_STEP);
            worst = worst.max(relative_error(grads.tensors[ti].value[k], numeric));
        }
        parameters += count;
        tensors.push(TensorCheck { name: net.params.tensors[ti].name.clone(), count, max_rel_error: worst });
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_rel_error, parameters, tensors })
}
