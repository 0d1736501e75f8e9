use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::describe::{describe_with_sets, Description, Fold};
use super::spec::{enumerate_action_specs, ActionSpec};
use super::trajectory::{synth_trajectory, ActionSequence, Frame, TrajectoryConfig, VISUAL_DIM};
use super::SimError;
use crate::embeddings::SynonymLexicon;
use crate::rng::SeedTree;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Training/test actions × trained/unseen descriptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    TrainTrained,
    TrainUnseen,
    TestTrained,
    TestUnseen,
}

impl Cell {
    pub const ALL: [Cell; 4] = [Cell::TrainTrained, Cell::TrainUnseen, Cell::TestTrained, Cell::TestUnseen];

    pub fn new(train_action: bool, trained_description: bool) -> Self {
        match (train_action, trained_description) {
            (true, true) => Cell::TrainTrained,
            (true, false) => Cell::TrainUnseen,
            (false, true) => Cell::TestTrained,
            (false, false) => Cell::TestUnseen,
        }
    }

    pub fn train_action(self) -> bool {
        matches!(self, Cell::TrainTrained | Cell::TrainUnseen)
    }

    pub fn trained_description(self) -> bool {
        matches!(self, Cell::TrainTrained | Cell::TestTrained)
    }

    pub fn name(self) -> &'static str {
        match self {
            Cell::TrainTrained => "train_trained",
            Cell::TrainUnseen => "train_unseen",
            Cell::TestTrained => "test_trained",
            Cell::TestUnseen => "test_unseen",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub fold: usize,
    pub seed: u64,
    pub trajectory: TrajectoryConfig,
    pub repetitions: usize,
    /// How many of the fold's four training word sets are used, in order.
    pub train_word_sets: usize,
    pub test_actions: usize,
}

impl DataConfig {
    pub fn full(fold: usize, seed: u64) -> Self {
        Self { fold, seed, trajectory: TrajectoryConfig::full(), repetitions: 6, train_word_sets: 4, test_actions: 18 }
    }

    pub fn desk(fold: usize, seed: u64) -> Self {
        Self { trajectory: TrajectoryConfig::desk(), repetitions: 1, train_word_sets: 2, ..Self::full(fold, seed) }
    }

    pub fn validate(&self) -> Result<Fold, SimError> {
        self.trajectory.validate()?;
        let fold = Fold::new(self.fold)?;
        if self.repetitions == 0 {
            return Err(SimError::Config("repetitions must be positive".into()));
        }
        if !(1..=4).contains(&self.train_word_sets) {
            return Err(SimError::Config(format!("train_word_sets must be in 1..=4, got {}", self.train_word_sets)));
        }
        if self.test_actions == 0 || self.test_actions >= 72 {
            return Err(SimError::Config(format!("test_actions must be in 1..72, got {}", self.test_actions)));
        }
        Ok(fold)
    }

    /// Word sets that appear in training descriptions.
    pub fn trained_sets(&self) -> Result<Vec<usize>, SimError> {
        let fold = self.validate()?;
        Ok(fold.train_sets[..self.train_word_sets].to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedSample {
    pub id: usize,
    /// Index into [`PairedDataset::specs`].
    pub pattern: usize,
    pub spec: ActionSpec,
    pub sequence: Arc<ActionSequence>,
    pub description: Description,
    /// Word set of the verb, adjective and adverb.
    pub word_sets: [usize; 3],
    /// 1-based.
    pub repetition: usize,
    pub cell: Cell,
}

impl PairedSample {
    /// Number of description words taken from the test word set.
    pub fn unseen_words(&self, test_set: usize) -> usize {
        self.word_sets.iter().filter(|&&s| s == test_set).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    /// Distinct (action, description) pairs per cell.
    pub pattern_counts: BTreeMap<Cell, usize>,
    /// Samples per cell, counting repetitions.
    pub sequence_counts: BTreeMap<Cell, usize>,
    pub train_actions: Vec<usize>,
    pub test_actions: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PairedDataset {
    pub config: DataConfig,
    pub fold: Fold,
    pub specs: Vec<ActionSpec>,
    pub samples: Vec<PairedSample>,
}

impl PairedDataset {
    pub fn cell(&self, cell: Cell) -> impl Iterator<Item = &PairedSample> {
        self.samples.iter().filter(move |s| s.cell == cell)
    }

    pub fn training(&self) -> Vec<&PairedSample> {
        self.cell(Cell::TrainTrained).collect()
    }

    pub fn split(&self) -> DatasetSplit {
        let mut split = DatasetSplit::default();
        let mut seen = std::collections::BTreeSet::new();
        for c in Cell::ALL {
            split.pattern_counts.insert(c, 0);
            split.sequence_counts.insert(c, 0);
        }
        for s in &self.samples {
            *split.sequence_counts.get_mut(&s.cell).expect("all cells") += 1;
            if seen.insert((s.pattern, s.word_sets)) {
                *split.pattern_counts.get_mut(&s.cell).expect("all cells") += 1;
            }
        }
        let mut train: Vec<usize> = self.samples.iter().filter(|s| s.cell.train_action()).map(|s| s.pattern).collect();
        let mut test: Vec<usize> = self.samples.iter().filter(|s| !s.cell.train_action()).map(|s| s.pattern).collect();
        for v in [&mut train, &mut test] {
            v.sort_unstable();
            v.dedup();
        }
        split.train_actions = train;
        split.test_actions = test;
        split
    }
}

/// Seeded partition of the 72 pattern indices into training and test actions.
fn partition_actions(cfg: &DataConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..72).collect();
    idx.shuffle(&mut SeedTree::new(cfg.seed).child("action-split").rng());
    let mut test = idx[..cfg.test_actions].to_vec();
    let mut train = idx[cfg.test_actions..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn build_dataset(cfg: &DataConfig, lexicon: &SynonymLexicon) -> Result<(PairedDataset, DatasetSplit), SimError> {
    let fold = cfg.validate()?;
    let trained = cfg.trained_sets()?;
    let mut sets = trained.clone();
    sets.push(fold.test_set);
    sets.sort_unstable();

    let specs = enumerate_action_specs();
    let (train_actions, _) = partition_actions(cfg);
    let reps = cfg.repetitions;

    let recordings = (0..specs.len() * reps)
        .into_par_iter()
        .map(|k| synth_trajectory(&specs[k / reps], &cfg.trajectory, cfg.seed, k % reps + 1).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;

    let mut samples = Vec::new();
    for (pattern, spec) in specs.iter().enumerate() {
        let train_action = train_actions.binary_search(&pattern).is_ok();
        for &v in &sets {
            for &a in &sets {
                for &adv in &sets {
                    let word_sets = [v, a, adv];
                    let description = describe_with_sets(spec, word_sets, lexicon)?;
                    let trained_description = word_sets.iter().all(|s| trained.contains(s));
                    let cell = Cell::new(train_action, trained_description);
                    for r in 0..reps {
                        samples.push(PairedSample {
                            id: samples.len(),
                            pattern,
                            spec: *spec,
                            sequence: recordings[pattern * reps + r].clone(),
                            description: description.clone(),
                            word_sets,
                            repetition: r + 1,
                            cell,
                        });
                    }
                }
            }
        }
    }
    let data = PairedDataset { config: cfg.clone(), fold, specs, samples };
    let split = data.split();
    Ok((data, split))
}

/// One JSON Lines record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub spec: ActionSpec,
    pub joints: Vec<Frame>,
    pub visual: [f64; VISUAL_DIM],
    pub tokens: Vec<String>,
    pub word_set: [usize; 3],
    pub repetition: usize,
    pub cell: Cell,
}

impl SampleRecord {
    pub fn from_sample(s: &PairedSample) -> Self {
        Self {
            id: s.id,
            spec: s.spec,
            joints: s.sequence.joints.clone(),
            visual: s.sequence.visual,
            tokens: s.description.tokens().to_vec(),
            word_set: s.word_sets,
            repetition: s.repetition,
            cell: s.cell,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: DataConfig,
    split: DatasetSplit,
    samples: usize,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `manifest.json` and, unless `manifest_only`, `dataset.jsonl` into `dir`.
pub fn write_dataset(data: &PairedDataset, dir: &Path, manifest_only: bool) -> Result<(), SimError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = Manifest { config: data.config.clone(), split: data.split(), samples: data.samples.len() };
    let mpath = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&mpath, e))?;
    std::fs::write(&mpath, text + "\n").map_err(|e| io_err(&mpath, e))?;
    if manifest_only {
        return Ok(());
    }
    let path = dir.join(DATASET_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    for s in &data.samples {
        serde_json::to_writer(&mut w, &SampleRecord::from_sample(s)).map_err(|e| io_err(&path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

/// Reads a directory written by [`write_dataset`]. Recordings shared between
/// samples in memory are shared again after loading.
pub fn read_dataset(dir: &Path, lexicon: &SynonymLexicon) -> Result<PairedDataset, SimError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| io_err(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| io_err(&mpath, e))?;
    let fold = manifest.config.validate()?;
    let specs = enumerate_action_specs();
    let path = dir.join(DATASET_FILE);
    let reader = BufReader::new(File::open(&path).map_err(|e| io_err(&path, e))?);
    let mut shared: BTreeMap<(usize, usize), Arc<ActionSequence>> = BTreeMap::new();
    let mut samples = Vec::with_capacity(manifest.samples);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| SimError::Parse { line: i + 1, message };
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let pattern = specs.iter().position(|s| *s == rec.spec).ok_or_else(|| parse("unknown action".into()))?;
        let description = Description::new(rec.tokens, lexicon)?;
        let seq = ActionSequence { joints: rec.joints, visual: rec.visual };
        if seq.is_empty() {
            return Err(parse("empty joint series".into()));
        }
        let sequence = shared.entry((pattern, rec.repetition)).or_insert_with(|| Arc::new(seq)).clone();
        samples.push(PairedSample {
            id: rec.id,
            pattern,
            spec: rec.spec,
            sequence,
            description,
            word_sets: rec.word_set,
            repetition: rec.repetition,
            cell: rec.cell,
        });
    }
    if samples.len() != manifest.samples {
        return Err(SimError::Parse {
            line: samples.len(),
            message: format!("manifest lists {} samples, file has {}", manifest.samples, samples.len()),
        });
    }
    Ok(PairedDataset { config: manifest.config, fold, specs, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_seeded() {
        let cfg = DataConfig::desk(1, 3);
        let (train, test) = partition_actions(&cfg);
        assert_eq!((train.len(), test.len()), (54, 18));
        assert_eq!(partition_actions(&cfg), (train.clone(), test));
        assert_ne!(partition_actions(&DataConfig::desk(1, 4)).0, train);
    }

    #[test]
    fn config_validation() {
        assert!(DataConfig::desk(0, 1).validate().is_err());
        assert!(DataConfig { repetitions: 0, ..DataConfig::desk(1, 1) }.validate().is_err());
        assert!(DataConfig { train_word_sets: 5, ..DataConfig::desk(1, 1) }.validate().is_err());
        assert_eq!(DataConfig::desk(2, 1).trained_sets().unwrap(), vec![1, 3]);
    }
}
