//! Alternating optimisation of the autoencoders and the retrofit layer.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{adam_step, AdamConfig, KernelError, Tape};
use crate::model::{batch_losses, Batch, Model, ModelError, ParamGroup};
use crate::rng::SeedTree;
use crate::simdata::PairedSample;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("iteration {}: non-finite loss (L_dsc {}, L_act {}, L_shr {})", .0.iter, .0.l_dsc, .0.l_act, .0.l_shr)]
    NonFinite(LogRecord),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(String),
}

impl From<KernelError> for TrainError {
    fn from(e: KernelError) -> Self {
        TrainError::Model(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: u64,
    pub n_ini: u64,
    pub n_ch: u64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub margin: f64,
    pub seed: u64,
    /// Save a checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: u64,
    /// Identity retrofit layer; RET iterations then update nothing.
    pub prae: bool,
}

impl TrainConfig {
    pub fn full(seed: u64) -> Self {
        Self {
            iterations: 17300,
            n_ini: 1,
            n_ch: 100,
            adam: AdamConfig::default(),
            batch_size: 120,
            margin: 1.0,
            seed,
            checkpoint_every: 1000,
            prae: false,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self { iterations: 5000, batch_size: 16, ..Self::full(seed) }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.n_ini > self.iterations {
            return Err(TrainError::Config(format!("n_ini {} exceeds N {}", self.n_ini, self.iterations)));
        }
        if self.n_ch == 0 {
            return Err(TrainError::Config("n_ch must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch size must be at least 2".into()));
        }
        if !(self.margin >= 0.0) || !(self.adam.lr >= 0.0) {
            return Err(TrainError::Config("margin and learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// The same configuration with the retrofit layer replaced by the identity.
pub fn ablate_prae(cfg: &TrainConfig) -> TrainConfig {
    TrainConfig { prae: true, ..cfg.clone() }
}

/// Which parameter set iteration `i` updates.
pub fn update_target(i: u64, n_ini: u64, n_ch: u64) -> ParamGroup {
    if i < n_ini || ((i - n_ini) / n_ch) % 2 == 1 {
        ParamGroup::Ae
    } else {
        ParamGroup::Ret
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: u64,
    pub target: ParamGroup,
    pub l_dsc: f64,
    pub l_act: f64,
    pub l_shr: f64,
    pub l_all: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

pub const LOG_HEADER: &str = "iter,target,L_dsc,L_act,L_shr,L_all";

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.records {
            let t = match r.target {
                ParamGroup::Ae => "AE",
                ParamGroup::Ret => "RET",
            };
            writeln!(s, "{},{t},{:?},{:?},{:?},{:?}", r.iter, r.l_dsc, r.l_act, r.l_shr, r.l_all).expect("string write");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, TrainError> {
        let mut lines = text.lines();
        if lines.next() != Some(LOG_HEADER) {
            return Err(TrainError::Io(format!("training log must start with {LOG_HEADER:?}")));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = || TrainError::Io(format!("training log line {}: {line:?}", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            records.push(LogRecord {
                iter: f[0].parse().map_err(|_| bad())?,
                target: match f[1] {
                    "AE" => ParamGroup::Ae,
                    "RET" => ParamGroup::Ret,
                    _ => return Err(bad()),
                },
                l_dsc: num(f[2])?,
                l_act: num(f[3])?,
                l_shr: num(f[4])?,
                l_all: num(f[5])?,
            });
        }
        Ok(Self { records })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_csv()).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
    }
}

/// Indices of the batch drawn at iteration `i`; depends only on `(seed, i)`.
pub fn sample_batch(seed: u64, i: u64, n: usize, k: usize) -> Vec<usize> {
    let mut rng = SeedTree::new(seed).child("batch").index(i).rng();
    (0..k).map(|_| rng.random_range(0..n)).collect()
}

/// One optimisation step at iteration `i`.
pub fn train_step(model: &mut Model, samples: &[&PairedSample], cfg: &TrainConfig, i: u64) -> Result<LogRecord, TrainError> {
    let target = update_target(i, cfg.n_ini, cfg.n_ch);
    let idx = sample_batch(cfg.seed, i, samples.len(), cfg.batch_size);
    let mut tokens = Vec::with_capacity(idx.len());
    let mut actions = Vec::with_capacity(idx.len());
    for &j in &idx {
        tokens.push(model.token_ids(samples[j].description.tokens())?);
        actions.push(samples[j].sequence.as_ref());
    }
    let batch = Batch { tokens, actions };
    let update = target == ParamGroup::Ae || model.config.use_retrofit;
    let mut tape = Tape::new();
    let trainable = if update { vec![target] } else { vec![] };
    let bound = model.bind(&mut tape, &trainable);
    let l = batch_losses(&mut tape, &bound, &batch, cfg.margin)?;
    let v = |id| tape.value(id).data()[0];
    let record = LogRecord { iter: i, target, l_dsc: v(l.dsc), l_act: v(l.act), l_shr: v(l.shr), l_all: v(l.total) };
    if !record.l_all.is_finite() {
        return Err(TrainError::NonFinite(record));
    }
    if update {
        let grads = tape.backprop(l.total)?;
        for k in model.group_indices(target) {
            let id = bound.get(&model.params[k].name);
            let g = grads.get(id).expect("trainable leaf has a gradient").clone();
            adam_step(std::slice::from_mut(&mut model.params[k]), &[g], &cfg.adam)?;
        }
    }
    Ok(record)
}

/// Runs iterations `start..cfg.iterations`, calling `on_checkpoint` after
/// every `checkpoint_every`-th completed iteration.
pub fn train_from<F>(
    model: &mut Model,
    samples: &[&PairedSample],
    cfg: &TrainConfig,
    start: u64,
    mut on_checkpoint: F,
) -> Result<TrainLog, TrainError>
where
    F: FnMut(&Model, u64, &TrainLog) -> Result<(), TrainError>,
{
    cfg.validate()?;
    if cfg.prae == model.config.use_retrofit {
        return Err(TrainError::Config(format!(
            "prae = {} but the model {} a retrofit layer",
            cfg.prae,
            if model.config.use_retrofit { "has" } else { "has no" }
        )));
    }
    let mut log = TrainLog::default();
    if start >= cfg.iterations {
        return Ok(log);
    }
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for i in start..cfg.iterations {
        log.records.push(train_step(model, samples, cfg, i)?);
        let done = i + 1;
        if cfg.checkpoint_every > 0 && (done % cfg.checkpoint_every == 0 || done == cfg.iterations) {
            on_checkpoint(model, done, &log)?;
        }
    }
    Ok(log)
}

/// Trains from scratch for `cfg.iterations` iterations.
pub fn train(model: &mut Model, samples: &[&PairedSample], cfg: &TrainConfig) -> Result<TrainLog, TrainError> {
    train_from(model, samples, cfg, 0, |_, _, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(update_target(0, 1, 100), ParamGroup::Ae);
        assert_eq!(update_target(50, 1, 100), ParamGroup::Ret);
        assert_eq!(update_target(150, 1, 100), ParamGroup::Ae);
        assert_eq!(update_target(100, 1, 100), ParamGroup::Ret);
        assert_eq!(update_target(101, 1, 100), ParamGroup::Ae);
    }

    #[test]
    fn batches_depend_on_seed_and_iteration() {
        assert_eq!(sample_batch(1, 5, 100, 8), sample_batch(1, 5, 100, 8));
        assert_ne!(sample_batch(1, 5, 100, 8), sample_batch(1, 6, 100, 8));
        assert!(sample_batch(2, 0, 3, 50).iter().all(|&i| i < 3));
    }

    #[test]
    fn log_csv_round_trip() {
        let log = TrainLog {
            records: vec![LogRecord { iter: 0, target: ParamGroup::Ret, l_dsc: 0.1, l_act: 1e-7, l_shr: 3.0, l_all: 3.1000001 }],
        };
        let csv = log.to_csv();
        assert!(csv.starts_with("iter,target,L_dsc,L_act,L_shr,L_all\n0,RET,"));
        assert_eq!(TrainLog::from_csv(&csv).unwrap(), log);
    }

    #[test]
    fn config_checks() {
        assert!(TrainConfig { batch_size: 1, ..TrainConfig::desk(0) }.validate().is_err());
        assert!(TrainConfig { n_ch: 0, ..TrainConfig::desk(0) }.validate().is_err());
        assert!(TrainConfig { n_ini: 10, iterations: 5, ..TrainConfig::desk(0) }.validate().is_err());
        assert!(ablate_prae(&TrainConfig::desk(0)).prae);
    }
}
