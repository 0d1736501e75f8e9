//! Pre-trained word embeddings: the word-set lexicon, a word2vec text
//! loader, a synthetic generator, and similarity/PCA analysis.

mod analysis;
mod lexicon;
mod synth;
mod table;

use thiserror::Error;

pub use analysis::{cluster_stats, cosine, cosine_matrix, pca_project, ClusterStats, PcaProjection};
pub use lexicon::{Pos, SymbolMode, SynonymGroup, SynonymLexicon, BOS, EOS, MERGED_SYMBOL};
pub use synth::{synth_pretrained, SynthConfig};
pub use table::{load_embedding_file, EmbeddingTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("missing header")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("word {0:?} is not in the embedding table")]
    MissingWord(String),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

impl EmbeddingError {
    pub(crate) fn parse(line: usize, message: String) -> Self {
        Self::Parse { line, message }
    }
}
