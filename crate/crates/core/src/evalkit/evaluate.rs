use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw, dtw_normalized};
use super::metrics::{description_success, speed_success, task_success, TaskThresholds};
use super::EvalError;
use crate::embeddings::SynonymLexicon;
use crate::model::{decode_actions, decode_descriptions, encode_actions, encode_descriptions, Model, StopRule};
use crate::simdata::{DataConfig, Frame, PairedDataset, PairedSample, REST_POSE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Describe every recorded action.
    #[serde(rename = "act2dsc")]
    Act2Dsc,
    /// Generate an action for every description and scene.
    #[serde(rename = "dsc2act")]
    Dsc2Act,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "act2dsc" => Ok(Mode::Act2Dsc),
            "dsc2act" => Ok(Mode::Dsc2Act),
            _ => Err(format!("unknown mode {s:?} (expected act2dsc or dsc2act)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSplit {
    Train,
    Test,
}

impl ActionSplit {
    pub fn label(self) -> &'static str {
        match self {
            ActionSplit::Train => "training actions",
            ActionSplit::Test => "test actions",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Description,
    Dtw,
    Speed,
    Task,
}

/// Column groupings: unseen-word counts, then which parts of speech are unseen.
pub const UNSEEN_COUNTS: [&str; 4] = ["0", "1", "2", "3"];
pub const UNSEEN_POS: [&str; 8] = ["-", "verb", "adj", "adv", "verb+adj", "adj+adv", "adv+verb", "verb+adj+adv"];

/// Label of the unseen parts of speech for `[verb, adj, adv]` flags.
pub fn pos_grouping(unseen: [bool; 3]) -> &'static str {
    match unseen {
        [false, false, false] => "-",
        [true, false, false] => "verb",
        [false, true, false] => "adj",
        [false, false, true] => "adv",
        [true, true, false] => "verb+adj",
        [false, true, true] => "adj+adv",
        [true, false, true] => "adv+verb",
        [true, true, true] => "verb+adj+adv",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), n: values.len() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub split: ActionSplit,
    pub grouping: String,
    pub metric: Metric,
    pub stats: Stats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub fold: usize,
    /// Success rates are percentages.
    pub rows: Vec<ReportRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub stop: StopRule,
    pub thresholds: TaskThresholds,
    pub normalize_dtw: bool,
    pub max_description_len: usize,
    /// Items decoded together.
    pub chunk: usize,
}

impl EvalConfig {
    pub fn for_data(cfg: &DataConfig) -> Self {
        Self {
            stop: StopRule::for_trajectory(&cfg.trajectory),
            thresholds: TaskThresholds::for_trajectory(&cfg.trajectory),
            normalize_dtw: false,
            max_description_len: 5,
            chunk: 128,
        }
    }
}

impl EvalReport {
    pub fn get(&self, split: ActionSplit, grouping: &str, metric: Metric) -> Option<&Stats> {
        self.rows
            .iter()
            .find(|r| r.split == split && r.grouping == grouping && r.metric == metric)
            .map(|r| &r.stats)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn table(&self, metric: Metric, groups: &[&str], cell: impl Fn(&Stats) -> String) -> String {
        let mut s = String::from("actions");
        for g in groups {
            write!(s, ",{g}").expect("string write");
        }
        s.push('\n');
        for split in [ActionSplit::Train, ActionSplit::Test] {
            s.push_str(split.label());
            for g in groups {
                let v = self.get(split, g, metric).map(&cell).unwrap_or_default();
                write!(s, ",{v}").expect("string write");
            }
            s.push('\n');
        }
        s
    }

    /// `(file name, CSV)` pairs laid out like the published tables.
    pub fn tables(&self) -> Vec<(String, String)> {
        let pct = |s: &Stats| format!("{:.2}", s.mean);
        match self.mode {
            Mode::Act2Dsc => {
                let mut s = String::from("training actions [%],test actions [%]\n");
                let v = |split| self.get(split, "all", Metric::Description).map(pct).unwrap_or_default();
                writeln!(s, "{},{}", v(ActionSplit::Train), v(ActionSplit::Test)).expect("string write");
                vec![("description_success.csv".into(), s)]
            }
            Mode::Dsc2Act => vec![
                ("dtw.csv".into(), self.table(Metric::Dtw, &UNSEEN_COUNTS, |s| format!("{:.4} (±{:.4})", s.mean, s.std))),
                ("speed_success.csv".into(), self.table(Metric::Speed, &UNSEEN_COUNTS, pct)),
                ("task_success.csv".into(), self.table(Metric::Task, &UNSEEN_POS, pct)),
            ],
        }
    }
}

fn split_of(s: &PairedSample) -> ActionSplit {
    if s.cell.train_action() {
        ActionSplit::Train
    } else {
        ActionSplit::Test
    }
}

fn check_vocabulary(model: &Model, data: &PairedDataset, lexicon: &SynonymLexicon) -> Result<(), EvalError> {
    if model.config.vocab != lexicon.vocabulary() {
        return Err(EvalError::Incompatible("model vocabulary differs from the lexicon".into()));
    }
    for s in &data.samples {
        for t in s.description.tokens() {
            if model.token_id(t).is_err() {
                return Err(EvalError::Incompatible(format!("dataset token {t:?} is not in the model vocabulary")));
            }
        }
    }
    Ok(())
}

fn success(b: bool) -> f64 {
    if b {
        100.0
    } else {
        0.0
    }
}

fn rows_from(groups: BTreeMap<(ActionSplit, String, Metric), Vec<f64>>) -> Vec<ReportRow> {
    groups
        .into_iter()
        .filter_map(|((split, grouping, metric), v)| Stats::of(&v).map(|stats| ReportRow { split, grouping, metric, stats }))
        .collect()
}

/// Runs one experiment over every sample of `data`.
pub fn evaluate(
    model: &Model,
    data: &PairedDataset,
    lexicon: &SynonymLexicon,
    mode: Mode,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    check_vocabulary(model, data, lexicon)?;
    let chunk = cfg.chunk.max(1);
    let mut groups: BTreeMap<(ActionSplit, String, Metric), Vec<f64>> = BTreeMap::new();
    match mode {
        Mode::Act2Dsc => {
            // One entry per recording.
            let mut recs: BTreeMap<(usize, usize), &PairedSample> = BTreeMap::new();
            for s in &data.samples {
                recs.entry((s.pattern, s.repetition)).or_insert(s);
            }
            let recs: Vec<&PairedSample> = recs.into_values().collect();
            let ok = recs
                .par_chunks(chunk)
                .map(|c| -> Result<Vec<bool>, EvalError> {
                    let seqs: Vec<_> = c.iter().map(|s| s.sequence.as_ref()).collect();
                    let z = encode_actions(model, &seqs)?;
                    let dec = decode_descriptions(model, &z, cfg.max_description_len)?;
                    Ok(c.iter().zip(dec).map(|(s, (t, _))| description_success(&t, &s.spec, lexicon)).collect())
                })
                .collect::<Result<Vec<_>, _>>()?
                .concat();
            for (s, ok) in recs.iter().zip(ok) {
                groups.entry((split_of(s), "all".into(), Metric::Description)).or_default().push(success(ok));
            }
        }
        Mode::Dsc2Act => {
            // Generation depends only on the description and the scene.
            let mut keys: BTreeMap<(usize, [usize; 3]), &PairedSample> = BTreeMap::new();
            for s in &data.samples {
                keys.entry((s.pattern, s.word_sets)).or_insert(s);
            }
            let keys: Vec<((usize, [usize; 3]), &PairedSample)> = keys.into_iter().collect();
            let generated = keys
                .par_chunks(chunk)
                .map(|c| -> Result<Vec<Vec<Frame>>, EvalError> {
                    let toks: Vec<&[String]> = c.iter().map(|(_, s)| s.description.tokens()).collect();
                    let z = encode_descriptions(model, &toks)?;
                    let init = vec![REST_POSE; c.len()];
                    let vis: Vec<_> = c.iter().map(|(_, s)| s.sequence.visual).collect();
                    Ok(decode_actions(model, &z, &init, &vis, &cfg.stop)?.into_iter().map(|d| d.joints).collect())
                })
                .collect::<Result<Vec<_>, _>>()?
                .concat();
            let by_key: BTreeMap<(usize, [usize; 3]), &Vec<Frame>> =
                keys.iter().map(|(k, _)| *k).zip(generated.iter()).collect();
            let test = data.fold.test_set;
            let scores = data
                .samples
                .par_iter()
                .map(|s| -> Result<[f64; 3], EvalError> {
                    let gen = by_key[&(s.pattern, s.word_sets)];
                    let d = if cfg.normalize_dtw { dtw_normalized(gen, &s.sequence.joints)? } else { dtw(gen, &s.sequence.joints)? };
                    let speed = speed_success(gen.len(), s.spec.speed, cfg.thresholds.speed_threshold);
                    Ok([d, success(speed), success(task_success(gen, &s.spec, &cfg.thresholds))])
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (s, [d, speed, task]) in data.samples.iter().zip(scores) {
                let split = split_of(s);
                let count = s.unseen_words(test).to_string();
                let pos = pos_grouping(s.word_sets.map(|w| w == test)).to_string();
                for (g, m, v) in [
                    (&count, Metric::Dtw, d),
                    (&count, Metric::Speed, speed),
                    (&count, Metric::Task, task),
                    (&pos, Metric::Dtw, d),
                    (&pos, Metric::Speed, speed),
                    (&pos, Metric::Task, task),
                ] {
                    groups.entry((split, g.clone(), m)).or_default().push(v);
                }
            }
        }
    }
    Ok(EvalReport { mode, fold: data.fold.index, rows: rows_from(groups) })
}
