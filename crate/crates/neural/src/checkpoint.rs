//! Weight checkpoints: `u64` little-endian header length, a JSON header, then
//! every tensor as little-endian `f32`, row-major, in header order.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use choreo_core::Skeleton;
use serde::{Deserialize, Serialize};

use crate::config::NetConfig;
use crate::error::{NeuralError, Result};
use crate::net::{Dims, Mat, Params, PoseNet, Tensor};

pub const CHECKPOINT_FORMAT: &str = "choreo-posenet/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: NetConfig,
    pub dims: Dims,
    pub skeleton: Skeleton,
    pub tensors: Vec<TensorHeader>,
}

pub fn to_bytes(net: &PoseNet) -> Vec<u8> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        config: net.config.clone(),
        dims: net.dims,
        skeleton: (*net.skeleton).clone(),
        tensors: net
            .params
            .tensors
            .iter()
            .map(|t| TensorHeader { name: t.name.clone(), shape: [t.value.nrows(), t.value.ncols()] })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(8 + json.len() + 4 * net.params.count());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &net.params.tensors {
        for r in 0..t.value.nrows() {
            for c in 0..t.value.ncols() {
                out.extend_from_slice(&(t.value[(r, c)] as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<PoseNet> {
    let bad = |m: String| NeuralError::Checkpoint(m);
    if bytes.len() < 8 {
        return Err(bad("truncated header length".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8usize.saturating_add(n)).ok_or_else(|| bad("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(bad(format!("unknown format `{}`", header.format)));
    }
    let mut data = &bytes[8 + n..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for th in &header.tensors {
        let [rows, cols] = th.shape;
        let need = rows * cols * 4;
        if data.len() < need {
            return Err(bad(format!("tensor `{}` truncated", th.name)));
        }
        let vals: Vec<f64> = data[..need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        data = &data[need..];
        tensors.push(Tensor { name: th.name.clone(), value: Mat::from_row_slice(rows, cols, &vals) });
    }
    if !data.is_empty() {
        return Err(bad(format!("{} trailing bytes", data.len())));
    }
    let skeleton = Arc::new(header.skeleton);
    if skeleton.joint_count() != header.dims.joints {
        return Err(bad("skeleton does not match the stored dimensions".into()));
    }
    PoseNet::with_params(header.config, skeleton, header.dims.motif_dim, Params { tensors })
}

pub fn save(net: &PoseNet, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PoseNet> {
    from_bytes(&std::fs::read(path)?)
}
