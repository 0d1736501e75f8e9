//! The paired recurrent autoencoder with an optional retrofit layer.
//!
//! Parameter names start with `ret.` (retrofit layer), `dsc.` (description
//! autoencoder) or `act.` (action autoencoder). The last two together form
//! the autoencoder set updated on AE iterations.

mod checkpoint;
mod graph;
mod infer;
mod loss;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{EmbeddingTable, SynonymLexicon};
use crate::kernel::{init_matrix, KernelError, NodeId, ParamState, Tape, Tensor};
use crate::rng::SeedTree;
use crate::simdata::{JOINT_DIM, VISUAL_DIM};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use graph::{batch_losses, Batch, BatchLosses, Bound, JOINT_STEP_SCALE};
pub use infer::{
    decode_action, decode_actions, decode_description, decode_descriptions, encode_action, encode_actions,
    encode_description, encode_descriptions, predict_next_frames, retrofit_forward, retrofitted_table, DecodedAction, StopRule,
};
pub use loss::{loss_act, loss_dsc, loss_shr, total_loss};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token {0:?} is not in the model vocabulary")]
    Vocabulary(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output vocabulary, in lexicon order.
    pub vocab: Vec<String>,
    pub embed_dim: usize,
    pub retrofit_hidden: usize,
    /// LSTM units per direction, shared by encoders and decoders.
    pub hidden: usize,
    pub z_dim: usize,
    /// `false` makes the retrofit layer the identity (the PRAE ablation).
    pub use_retrofit: bool,
}

impl ModelConfig {
    pub fn full(lexicon: &SynonymLexicon) -> Self {
        Self {
            vocab: lexicon.vocabulary(),
            embed_dim: 300,
            retrofit_hidden: 400,
            hidden: 500,
            z_dim: 500,
            use_retrofit: true,
        }
    }

    pub fn desk(lexicon: &SynonymLexicon) -> Self {
        Self { embed_dim: 16, retrofit_hidden: 64, hidden: 64, z_dim: 64, ..Self::full(lexicon) }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if [self.embed_dim, self.retrofit_hidden, self.hidden, self.z_dim].contains(&0) {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        if self.vocab.len() < 2 {
            return Err(ModelError::Config("vocabulary needs at least two tokens".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.vocab.iter().find(|w| !seen.insert(w.as_str())) {
            return Err(ModelError::Config(format!("duplicate vocabulary entry {dup:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ParamGroup {
    /// Both autoencoders.
    Ae,
    /// The retrofit layer.
    Ret,
}

impl ParamGroup {
    pub fn of(name: &str) -> ParamGroup {
        if name.starts_with("ret.") {
            ParamGroup::Ret
        } else {
            ParamGroup::Ae
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    /// Frozen pre-trained vectors, one row per vocabulary entry.
    pub embeddings: Tensor,
    /// Sorted by name.
    pub params: Vec<ParamState>,
}

fn lstm_shapes(prefix: &str, inputs: &[(&str, usize)], u: usize, out: &mut Vec<(String, Vec<usize>, usize, usize)>) {
    let fan_in: usize = inputs.iter().map(|(_, d)| d).sum();
    for (name, d) in inputs {
        out.push((format!("{prefix}.{name}"), vec![*d, 4 * u], fan_in, 4 * u));
    }
    out.push((format!("{prefix}.wh"), vec![u, 4 * u], u, 4 * u));
    out.push((format!("{prefix}.b"), vec![4 * u], 0, 0));
}

fn dense_shapes(prefix: &str, i: usize, o: usize, out: &mut Vec<(String, Vec<usize>, usize, usize)>) {
    out.push((format!("{prefix}.w"), vec![i, o], i, o));
    out.push((format!("{prefix}.b"), vec![o], 0, 0));
}

impl Model {
    /// Randomly initialised model. Weights are Glorot uniform, biases zero
    /// except LSTM forget gates, which start at one.
    pub fn new(config: ModelConfig, table: &EmbeddingTable, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if table.dim() != config.embed_dim {
            return Err(ModelError::Config(format!(
                "embedding table has dimension {}, config expects {}",
                table.dim(),
                config.embed_dim
            )));
        }
        let mut rows = Vec::with_capacity(config.vocab.len() * config.embed_dim);
        for w in &config.vocab {
            rows.extend_from_slice(table.get(w).ok_or_else(|| ModelError::Vocabulary(w.clone()))?);
        }
        let embeddings = Tensor::new(vec![config.vocab.len(), config.embed_dim], rows)?;

        let tree = SeedTree::new(seed).child("init");
        let mut params = Vec::new();
        for (name, shape, fan_in, fan_out) in Self::shapes(&config) {
            let value = if shape.len() == 1 {
                let mut b = vec![0.0; shape[0]];
                if ["fw.b", "bw.b", "dec.b"].iter().any(|s| name.ends_with(s)) {
                    let u = shape[0] / 4;
                    b[u..2 * u].iter_mut().for_each(|x| *x = 1.0);
                }
                Tensor::new(shape, b)?
            } else {
                let mut rng = tree.child(&name).rng();
                init_matrix(&mut rng, shape[0], shape[1], fan_in, fan_out)
            };
            params.push(ParamState::new(name, value));
        }
        params.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self { config, embeddings, params })
    }

    /// `(name, shape, fan_in, fan_out)` of every parameter.
    fn shapes(c: &ModelConfig) -> Vec<(String, Vec<usize>, usize, usize)> {
        let (e, u, z) = (c.embed_dim, c.hidden, c.z_dim);
        let mut out = Vec::new();
        if c.use_retrofit {
            dense_shapes("ret.l1", e, c.retrofit_hidden, &mut out);
            dense_shapes("ret.l2", c.retrofit_hidden, c.retrofit_hidden, &mut out);
            dense_shapes("ret.l3", c.retrofit_hidden, e, &mut out);
        }
        for dir in ["fw", "bw"] {
            lstm_shapes(&format!("dsc.enc.{dir}"), &[("wx", e)], u, &mut out);
            lstm_shapes(&format!("act.enc.{dir}"), &[("wx", JOINT_DIM), ("wv", VISUAL_DIM)], u, &mut out);
        }
        for m in ["dsc", "act"] {
            out.push((format!("{m}.enc.z.wf"), vec![u, z], 2 * u, z));
            out.push((format!("{m}.enc.z.wb"), vec![u, z], 2 * u, z));
            out.push((format!("{m}.enc.z.b"), vec![z], 0, 0));
            if z != u {
                dense_shapes(&format!("{m}.dec.h0"), z, u, &mut out);
            }
        }
        lstm_shapes("dsc.dec", &[("wx", e)], u, &mut out);
        lstm_shapes("act.dec", &[("wx", JOINT_DIM), ("wv", VISUAL_DIM)], u, &mut out);
        dense_shapes("dsc.out", u, c.vocab.len(), &mut out);
        dense_shapes("act.out", u, JOINT_DIM, &mut out);
        out
    }

    pub fn param(&self, name: &str) -> Option<&ParamState> {
        self.params.binary_search_by(|p| p.name.as_str().cmp(name)).ok().map(|i| &self.params[i])
    }

    #[cfg(test)]
    pub(crate) fn value(&self, name: &str) -> &Tensor {
        &self.param(name).unwrap_or_else(|| panic!("parameter {name} missing")).value
    }

    pub fn token_id(&self, token: &str) -> Result<usize, ModelError> {
        self.config.vocab.iter().position(|w| w == token).ok_or_else(|| ModelError::Vocabulary(token.to_string()))
    }

    pub fn token_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>, ModelError> {
        tokens.iter().map(|t| self.token_id(t.as_ref())).collect()
    }

    /// Indices into `params` belonging to `group`.
    pub fn group_indices(&self, group: ParamGroup) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| ParamGroup::of(&self.params[i].name) == group).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records every parameter as a leaf; only groups in `trainable` get
    /// gradients.
    pub fn bind(&self, tape: &mut Tape, trainable: &[ParamGroup]) -> Bound {
        let mut ids = BTreeMap::new();
        for p in &self.params {
            let grad = trainable.contains(&ParamGroup::of(&p.name));
            ids.insert(p.name.clone(), tape.leaf(p.value.clone(), grad));
        }
        let emb = tape.constant(self.embeddings.clone());
        Bound::new(ids, emb, self.config.clone())
    }

    /// Checks that `other` has the same architecture and vocabulary.
    pub fn compatible(&self, other: &ModelConfig) -> Result<(), ModelError> {
        if &self.config != other {
            return Err(ModelError::Config(format!(
                "checkpoint architecture {:?} does not match expected {:?}",
                summary(&self.config),
                summary(other)
            )));
        }
        Ok(())
    }
}

fn summary(c: &ModelConfig) -> (usize, usize, usize, usize, usize, bool) {
    (c.vocab.len(), c.embed_dim, c.retrofit_hidden, c.hidden, c.z_dim, c.use_retrofit)
}

pub(crate) fn node_rows(tape: &Tape, id: NodeId) -> Vec<Vec<f64>> {
    let v = tape.value(id);
    (0..v.rows()).map(|r| v.row(r).to_vec()).collect()
}

#[cfg(test)]
mod tests;
