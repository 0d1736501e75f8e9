//! JSON checkpoints: parameters, Adam moments and the iteration counter.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Model, ModelConfig, ModelError};
use crate::kernel::{ParamState, Tensor};

pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Iterations completed.
    pub iteration: u64,
    /// Training configuration the run was started with, if any.
    pub train: Value,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AdamJson {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct File {
    adam: BTreeMap<String, AdamJson>,
    config: ModelConfig,
    embeddings: TensorJson,
    iteration: u64,
    params: BTreeMap<String, TensorJson>,
    train: Value,
    version: u64,
}

fn tensor_json(t: &Tensor) -> TensorJson {
    TensorJson { shape: t.shape().to_vec(), data: t.to_vec() }
}

impl Checkpoint {
    pub fn new(model: Model, iteration: u64, train: Value) -> Self {
        Self { model, iteration, train }
    }

    /// Serialized form with every object's keys sorted.
    pub fn to_json(&self) -> Result<String, ModelError> {
        let m = &self.model;
        let file = File {
            adam: m
                .params
                .iter()
                .map(|p| (p.name.clone(), AdamJson { m: p.adam_m.to_vec(), v: p.adam_v.to_vec(), step: p.step }))
                .collect(),
            config: m.config.clone(),
            embeddings: tensor_json(&m.embeddings),
            iteration: self.iteration,
            params: m.params.iter().map(|p| (p.name.clone(), tensor_json(&p.value))).collect(),
            train: self.train.clone(),
            version: CHECKPOINT_VERSION,
        };
        let err = |e: serde_json::Error| ModelError::Checkpoint { path: String::new(), message: e.to_string() };
        // Round-tripping through Value sorts keys of nested structs too.
        let value = serde_json::to_value(&file).map_err(err)?;
        serde_json::to_string(&value).map_err(err)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let bad = |message: String| ModelError::Checkpoint { path: String::new(), message };
        let value: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        match value.get("version").and_then(Value::as_u64) {
            Some(CHECKPOINT_VERSION) => {}
            Some(found) => return Err(ModelError::Version { found, expected: CHECKPOINT_VERSION }),
            None => return Err(bad("missing version".into())),
        }
        let file: File = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        file.config.validate()?;
        let expected = Model::shapes(&file.config);
        if expected.len() != file.params.len() {
            return Err(bad(format!("{} parameters, architecture has {}", file.params.len(), expected.len())));
        }
        let mut params = Vec::with_capacity(expected.len());
        for (name, shape, _, _) in expected {
            let t = file.params.get(&name).ok_or_else(|| bad(format!("missing parameter {name}")))?;
            if t.shape != shape {
                return Err(bad(format!("parameter {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
            let a = file.adam.get(&name).ok_or_else(|| bad(format!("missing Adam state for {name}")))?;
            params.push(ParamState {
                name: name.clone(),
                value: Tensor::new(shape.clone(), t.data.clone())?,
                adam_m: Tensor::new(shape.clone(), a.m.clone())?,
                adam_v: Tensor::new(shape, a.v.clone())?,
                step: a.step,
            });
        }
        params.sort_by(|a, b| a.name.cmp(&b.name));
        let e = &file.embeddings;
        if e.shape != [file.config.vocab.len(), file.config.embed_dim] {
            return Err(bad(format!("embedding matrix of shape {:?}", e.shape)));
        }
        let embeddings = Tensor::new(e.shape.clone(), e.data.clone())?;
        Ok(Self { model: Model { config: file.config, embeddings, params }, iteration: file.iteration, train: file.train })
    }
}

fn with_path(e: ModelError, path: &Path) -> ModelError {
    match e {
        ModelError::Checkpoint { message, .. } => ModelError::Checkpoint { path: path.display().to_string(), message },
        other => other,
    }
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), ModelError> {
    let text = ckpt.to_json().map_err(|e| with_path(e, path))?;
    let io = |e: std::io::Error| ModelError::Checkpoint { path: path.display().to_string(), message: e.to_string() };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Checkpoint { path: path.display().to_string(), message: e.to_string() })?;
    Checkpoint::from_json(&text).map_err(|e| with_path(e, path))
}
