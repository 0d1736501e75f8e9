use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::synth::norm;
use super::{EmbeddingError, EmbeddingTable, SynonymLexicon};

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

/// Pairwise cosine similarities of `words`, in the given order.
pub fn cosine_matrix(table: &EmbeddingTable, words: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let vecs: Vec<&[f64]> = words.iter().map(|w| table.lookup(w)).collect::<Result<_, _>>()?;
    if let Some(w) = words.iter().zip(&vecs).find(|(_, v)| norm(v) == 0.0) {
        return Err(EmbeddingError::Invalid(format!("zero vector for {:?}", w.0)));
    }
    let n = vecs.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let c = cosine(vecs[i], vecs[j])?;
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub words: Vec<String>,
    /// One row per word, `k` coordinates each.
    pub coords: Vec<Vec<f64>>,
    /// Unit principal directions, one per component.
    pub components: Vec<Vec<f64>>,
    /// Population variance captured by each component, non-increasing.
    pub variances: Vec<f64>,
}

/// Projects the mean-centred vectors of `words` onto their top `k` right
/// singular directions. Each direction is oriented so its largest-magnitude
/// loading is positive.
pub fn pca_project(table: &EmbeddingTable, words: &[&str], k: usize) -> Result<PcaProjection, EmbeddingError> {
    let n = words.len();
    let d = table.dim();
    if k == 0 || k > n.min(d) {
        return Err(EmbeddingError::Invalid(format!(
            "cannot extract {k} components from {n} words of dimension {d}"
        )));
    }
    let rows: Vec<&[f64]> = words.iter().map(|w| table.lookup(w)).collect::<Result<_, _>>()?;
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (m, x) in mean.iter_mut().zip(*r) {
            *m += x / n as f64;
        }
    }
    let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let svd = centred.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut dir: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let lead = dir.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        let s = svd.singular_values[idx];
        variances.push(s * s / n as f64);
        components.push(dir);
    }
    // Components beyond the rank of a small sample come back from the SVD
    // only up to min(n, d); k ≤ min(n, d) keeps us inside that range.
    let coords = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|c| c.iter().enumerate().map(|(j, v)| centred[(i, j)] * v).sum())
                .collect()
        })
        .collect();
    Ok(PcaProjection { words: words.iter().map(|w| w.to_string()).collect(), coords, components, variances })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    /// Mean cosine over pairs of words from the same synonym group.
    pub intra_mean: f64,
    /// Mean cosine over pairs of words from different groups.
    pub inter_mean: f64,
    /// Cosine between the slowly-group and fast-group centroids.
    pub antonym_cosine: f64,
}

pub fn cluster_stats(table: &EmbeddingTable, lexicon: &SynonymLexicon) -> Result<ClusterStats, EmbeddingError> {
    let words: Vec<(usize, &[f64])> = lexicon
        .groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| g.members.iter().map(move |m| (gi, m)))
        .map(|(gi, m)| table.lookup(m).map(|v| (gi, v)))
        .collect::<Result<_, _>>()?;
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let c = cosine(words[i].1, words[j].1)?;
            if words[i].0 == words[j].0 {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    let centroid = |label: &str| -> Result<Vec<f64>, EmbeddingError> {
        let g = lexicon
            .group(label)
            .ok_or_else(|| EmbeddingError::Invalid(format!("lexicon has no {label:?} group")))?;
        let mut c = vec![0.0; table.dim()];
        for m in &g.members {
            for (a, b) in c.iter_mut().zip(table.lookup(m)?) {
                *a += b / g.members.len() as f64;
            }
        }
        Ok(c)
    };
    Ok(ClusterStats {
        intra_mean: intra / n_intra as f64,
        inter_mean: inter / n_inter as f64,
        antonym_cosine: cosine(&centroid("slowly")?, &centroid("fast")?)?,
    })
}
