//! Evaluation: DTW, the success metrics, report aggregation and embedding
//! analysis.

mod analyze;
mod dtw;
mod evaluate;
mod metrics;
pub mod svg;

use thiserror::Error;

pub use analyze::{analyze_embeddings, EmbeddingAnalysis};
pub use dtw::{dtw, dtw_normalized};
pub use evaluate::{
    evaluate, pos_grouping, ActionSplit, EvalConfig, EvalReport, Metric, Mode, ReportRow, Stats, UNSEEN_COUNTS,
    UNSEEN_POS,
};
pub use metrics::{description_success, speed_success, task_success, TaskThresholds};

use crate::embeddings::EmbeddingError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Input(String),
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}
