//! Run configuration: a scale preset, overlaid by an optional JSON file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rprae::embeddings::{SymbolMode, SynonymLexicon, SynthConfig};
use rprae::evalkit::EvalConfig;
use rprae::model::ModelConfig;
use rprae::simdata::DataConfig;
use rprae::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

pub const SNAPSHOT_FILE: &str = "config.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Seeded synthetic vectors.
    Synthetic(SynthConfig),
    /// A word2vec text file covering the whole vocabulary.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub embed_dim: usize,
    pub retrofit_hidden: usize,
    pub hidden: usize,
    pub z_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scale: Scale,
    /// Drives data generation, initialisation, batches and synthetic embeddings.
    pub seed: u64,
    pub symbols: SymbolMode,
    pub embeddings: EmbeddingSource,
    pub data: DataConfig,
    pub model: ModelDims,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub out: PathBuf,
    /// Dataset directory; generated in memory when absent.
    pub dataset: Option<PathBuf>,
    /// Checkpoint to evaluate, analyse or resume; defaults to the one in `out`.
    pub checkpoint: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for data generation and evaluation.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Preset used for fields the configuration file leaves out.
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
}

impl RunConfig {
    pub fn preset(scale: Scale) -> Self {
        let lex = SynonymLexicon::default();
        let (data, model, train) = match scale {
            Scale::Desk => (DataConfig::desk(1, 1), ModelConfig::desk(&lex), TrainConfig::desk(1)),
            Scale::Full => (DataConfig::full(1, 1), ModelConfig::full(&lex), TrainConfig::full(1)),
        };
        Self {
            scale,
            seed: 1,
            symbols: SymbolMode::Distinct,
            embeddings: EmbeddingSource::Synthetic(SynthConfig::default()),
            eval: EvalConfig::for_data(&data),
            data,
            model: ModelDims {
                embed_dim: model.embed_dim,
                retrofit_hidden: model.retrofit_hidden,
                hidden: model.hidden,
                z_dim: model.z_dim,
            },
            train,
            out: PathBuf::from("out"),
            dataset: None,
            checkpoint: None,
            threads: None,
        }
    }

    /// Preset, then the file, then the flags. Invalid values are usage errors.
    pub fn resolve(common: &CommonArgs) -> anyhow::Result<Self> {
        let file: Value = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
            }
            None => Value::Object(Default::default()),
        };
        if !file.is_object() {
            return Err(UsageError("the configuration file must hold a JSON object".into()).into());
        }
        let scale = match (common.scale, file.get("scale")) {
            (Some(s), _) => s,
            (None, Some(v)) => serde_json::from_value(v.clone()).map_err(|e| UsageError(format!("scale: {e}")))?,
            (None, None) => Scale::Desk,
        };
        let mut merged = serde_json::to_value(Self::preset(scale)).expect("preset serializes");
        overlay(&mut merged, file);
        let mut run: RunConfig = serde_json::from_value(merged).map_err(|e| UsageError(format!("configuration: {e}")))?;
        run.scale = scale;
        if let Some(seed) = common.seed {
            run.seed = seed;
        }
        if let Some(out) = &common.out {
            run.out = out.clone();
        }
        if common.threads.is_some() {
            run.threads = common.threads;
        }
        Ok(run)
    }

    /// Copies the run seed into the sub-configurations and validates them.
    pub fn finish(mut self) -> anyhow::Result<Self> {
        self.data.seed = self.seed;
        self.train.seed = self.seed;
        self.data.validate().map_err(|e| UsageError(e.to_string()))?;
        self.train.validate().map_err(|e| UsageError(e.to_string()))?;
        if self.threads == Some(0) {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        Ok(self)
    }

    pub fn lexicon(&self) -> SynonymLexicon {
        SynonymLexicon::standard(self.symbols)
    }

    pub fn model_config(&self, lexicon: &SynonymLexicon, use_retrofit: bool) -> ModelConfig {
        ModelConfig {
            vocab: lexicon.vocabulary(),
            embed_dim: self.model.embed_dim,
            retrofit_hidden: self.model.retrofit_hidden,
            hidden: self.model.hidden,
            z_dim: self.model.z_dim,
            use_retrofit,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join(crate::commands::CHECKPOINT_FILE))
    }

    pub fn write_snapshot(&self) -> anyhow::Result<()> {
        let path = self.out.join(SNAPSHOT_FILE);
        write_file(&path, &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

/// Recursively replaces fields of `base` with those present in `top`.
fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
