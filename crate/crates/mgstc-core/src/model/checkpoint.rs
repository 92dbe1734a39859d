//! Versioned JSON checkpoint: config header, parameter blobs keyed by
//! canonical names, and the RNG seed. f64 values survive the round trip
//! bit-exactly (shortest-roundtrip float formatting).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{ModelConfig, ModelState};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamBlob {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    seed: u64,
    params: Vec<ParamBlob>,
}

pub fn save(state: &ModelState, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: state.config,
        seed: state.seed,
        params: state
            .parameters()
            .iter()
            .map(|p| ParamBlob {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                data: p.value.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::format(format!("checkpoint serialization: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelState> {
    let json = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&json)
        .map_err(|e| Error::format(format!("checkpoint parse: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {} (expected {})",
            file.version, CHECKPOINT_VERSION
        )));
    }
    let mut state = ModelState::init(file.config, file.seed)?;
    let expected = state.parameters().len();
    if file.params.len() != expected {
        return Err(Error::format(format!(
            "checkpoint has {} parameters, model expects {}",
            file.params.len(),
            expected
        )));
    }
    for (param, blob) in state.parameters_mut().into_iter().zip(file.params) {
        if param.name != blob.name {
            return Err(Error::format(format!(
                "checkpoint parameter '{}' where '{}' was expected",
                blob.name, param.name
            )));
        }
        if param.value.shape() != blob.shape.as_slice() {
            return Err(Error::format(format!(
                "checkpoint parameter '{}' has shape {:?}, model expects {:?}",
                blob.name,
                blob.shape,
                param.value.shape()
            )));
        }
        param.value = Tensor::from_vec(blob.shape, blob.data)?.with_requires_grad();
    }
    Ok(state)
}
