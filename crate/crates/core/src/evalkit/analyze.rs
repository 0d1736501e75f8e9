use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::embeddings::{cluster_stats, cosine_matrix, pca_project, ClusterStats, EmbeddingTable, PcaProjection, SynonymLexicon};
use crate::model::{retrofitted_table, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAnalysis {
    /// Row and column order of the matrices: groups contiguous, symbols last.
    pub words: Vec<String>,
    pub input_cosine: Vec<Vec<f64>>,
    pub retrofit_cosine: Vec<Vec<f64>>,
    pub input_pca: PcaProjection,
    pub retrofit_pca: PcaProjection,
    pub input_stats: ClusterStats,
    pub retrofit_stats: ClusterStats,
}

fn table_from(words: &[String], m: &crate::kernel::Tensor) -> Result<EmbeddingTable, EvalError> {
    let mut t = EmbeddingTable::new(m.cols())?;
    for (i, w) in words.iter().enumerate() {
        t.insert(w.clone(), m.row(i).to_vec())?;
    }
    Ok(t)
}

/// Similarity structure of the vocabulary before and after the retrofit layer.
pub fn analyze_embeddings(model: &Model, lexicon: &SynonymLexicon) -> Result<EmbeddingAnalysis, EvalError> {
    let words = lexicon.vocabulary();
    if model.config.vocab != words {
        return Err(EvalError::Incompatible("model vocabulary differs from the lexicon".into()));
    }
    let input = table_from(&words, &model.embeddings)?;
    let retro = table_from(&words, &retrofitted_table(model)?)?;
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let k = 3.min(model.config.embed_dim);
    Ok(EmbeddingAnalysis {
        input_cosine: cosine_matrix(&input, &refs)?,
        retrofit_cosine: cosine_matrix(&retro, &refs)?,
        input_pca: pca_project(&input, &refs, k)?,
        retrofit_pca: pca_project(&retro, &refs, k)?,
        input_stats: cluster_stats(&input, lexicon)?,
        retrofit_stats: cluster_stats(&retro, lexicon)?,
        words,
    })
}
