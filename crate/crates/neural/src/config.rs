use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};

/// Rhythmic features per frame.
pub const RHYTHMIC_DIM: usize = choreo_core::audio::RHYTHMIC_DIM;

/// Network and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: usize,
    pub layers: usize,
    /// Weight of the perceptual term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch: usize,
    /// Frames per training window.
    pub window: usize,
    /// Auto-conditioning schedule: steps fed ground truth, then steps fed the
    /// network's own output, repeating.
    pub gt_len: usize,
    pub self_len: usize,
    /// Weight of the forward-kinematics position term in the coherence metric.
    pub position_weight: f64,
    /// Weight of the contact cross-entropy term.
    pub contact_weight: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    /// Add the input pose block to the head output before normalization, so
    /// the head predicts a change of pose.
    pub residual: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            layers: 3,
            lambda: 0.5,
            learning_rate: 1e-4,
            batch: 32,
            window: 100,
            gt_len: 5,
            self_len: 5,
            position_weight: 1.0,
            contact_weight: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 0.0,
            residual: true,
        }
    }
}

impl NetConfig {
    /// `[rhythmic(4), motif(d), pose(3 + 4J), contacts(2)]`
    pub fn input_dim(motif_dim: usize, joints: usize) -> usize {
        RHYTHMIC_DIM + motif_dim + Self::output_dim(joints)
    }

    /// `[pose(3 + 4J), contacts(2)]`
    pub fn output_dim(joints: usize) -> usize {
        3 + 4 * joints + 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.hidden == 0 || self.layers == 0 || self.batch == 0 {
            return bad("hidden, layers and batch must be positive");
        }
        if self.window < 2 {
            return bad("window must hold at least 2 frames");
        }
        if self.gt_len + self.self_len == 0 {
            return bad("gt_len + self_len must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) {
            return bad("learning_rate must be positive and lambda non-negative");
        }
        if !(self.position_weight >= 0.0 && self.contact_weight >= 0.0 && self.clip_norm >= 0.0) {
            return bad("loss weights and clip_norm must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("invalid Adam constants");
        }
        Ok(())
    }

    /// Whether step `t` of a window is fed ground truth. Step 0 always is.
    pub fn fed_ground_truth(&self, t: usize) -> bool {
        t == 0 || self.self_len == 0 || (self.gt_len > 0 && t % (self.gt_len + self.self_len) < self.gt_len)
    }
}
