use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingTable, SynonymLexicon};
use crate::rng::SeedTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Per-component standard deviation of member noise around the group centroid.
    pub intra_noise: f64,
    /// The slowly/fast centroids are built with cosine `1 − antonym_gap / 2`,
    /// which is at least `1 − antonym_gap`.
    pub antonym_gap: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { intra_noise: 0.1, antonym_gap: 0.1 }
    }
}

fn unit_gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Synthetic "pre-trained" embeddings: synonyms cluster around a random
/// group centroid while the two speed-adverb groups are placed almost on
/// top of each other, mimicking antonyms that share contexts in a corpus.
pub fn synth_pretrained(
    lexicon: &SynonymLexicon,
    dim: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<EmbeddingTable, EmbeddingError> {
    if dim < 8 {
        return Err(EmbeddingError::Invalid(format!("dimension {dim} is below the minimum of 8")));
    }
    let root = SeedTree::new(seed).child("synth-embeddings");
    let mut centroids: Vec<Vec<f64>> = lexicon
        .groups
        .iter()
        .map(|g| unit_gaussian(&mut root.child(&format!("centroid/{}", g.label)).rng(), dim))
        .collect();

    let slow = lexicon.groups.iter().position(|g| g.label == "slowly");
    let fast = lexicon.groups.iter().position(|g| g.label == "fast");
    if let (Some(s), Some(f)) = (slow, fast) {
        let cos = 1.0 - cfg.antonym_gap / 2.0;
        let sin = (1.0 - cos * cos).max(0.0).sqrt();
        let base = centroids[s].clone();
        // Direction orthogonal to the slowly centroid.
        let r = &centroids[f];
        let proj: f64 = r.iter().zip(&base).map(|(a, b)| a * b).sum();
        let mut ortho: Vec<f64> = r.iter().zip(&base).map(|(a, b)| a - proj * b).collect();
        let on = norm(&ortho);
        ortho.iter_mut().for_each(|x| *x /= on);
        centroids[f] = base.iter().zip(&ortho).map(|(b, o)| cos * b + sin * o).collect();
    }

    let mut table = EmbeddingTable::new(dim)?;
    for (g, centroid) in lexicon.groups.iter().zip(&centroids) {
        // Member noise is centred within the group (and rescaled to keep the
        // per-component variance), so the group mean stays on the centroid.
        let k = g.members.len() as f64;
        let noise: Vec<Vec<f64>> = g
            .members
            .iter()
            .map(|m| {
                let mut rng = root.child(&format!("member/{m}")).rng();
                (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
            })
            .collect();
        let mean: Vec<f64> = (0..dim).map(|j| noise.iter().map(|e| e[j]).sum::<f64>() / k).collect();
        let rescale = if k > 1.0 { (k / (k - 1.0)).sqrt() } else { 1.0 };
        for (member, e) in g.members.iter().zip(&noise) {
            let v: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + cfg.intra_noise * rescale * (e[j] - mean[j]))
                .collect();
            let n = norm(&v);
            table.insert(member.clone(), v.into_iter().map(|x| x / n).collect())?;
        }
    }
    for sym in lexicon.symbols() {
        let v = unit_gaussian(&mut root.child(&format!("symbol/{sym}")).rng(), dim);
        table.insert(sym, v)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{cosine, SymbolMode};

    fn centroid(t: &EmbeddingTable, lex: &SynonymLexicon, label: &str) -> Vec<f64> {
        let g = lex.group(label).unwrap();
        let mut c = vec![0.0; t.dim()];
        for m in &g.members {
            for (a, b) in c.iter_mut().zip(t.get(m).unwrap()) {
                *a += b / 5.0;
            }
        }
        c
    }

    #[test]
    fn zero_noise_collapses_groups() {
        let lex = SynonymLexicon::default();
        let cfg = SynthConfig { intra_noise: 0.0, ..SynthConfig::default() };
        let t = synth_pretrained(&lex, 16, 3, &cfg).unwrap();
        for g in &lex.groups {
            let first = t.get(&g.members[0]).unwrap();
            assert!(g.members.iter().all(|m| t.get(m).unwrap() == first));
        }
    }

    #[test]
    fn antonyms_start_close() {
        let lex = SynonymLexicon::default();
        for seed in 0..5 {
            let t = synth_pretrained(&lex, 16, seed, &SynthConfig::default()).unwrap();
            let c = cosine(&centroid(&t, &lex, "slowly"), &centroid(&t, &lex, "fast")).unwrap();
            assert!(c >= 0.9, "seed {seed}: {c}");
        }
    }

    #[test]
    fn deterministic_and_complete() {
        let lex = SynonymLexicon::default();
        let a = synth_pretrained(&lex, 16, 9, &SynthConfig::default()).unwrap();
        let b = synth_pretrained(&lex, 16, 9, &SynthConfig::default()).unwrap();
        assert_eq!(a.to_word2vec(), b.to_word2vec());
        assert_eq!(a.len(), 42);
        assert_ne!(a, synth_pretrained(&lex, 16, 10, &SynthConfig::default()).unwrap());
        let merged = SynonymLexicon::standard(SymbolMode::Merged);
        assert_eq!(synth_pretrained(&merged, 16, 9, &SynthConfig::default()).unwrap().len(), 41);
        assert!(synth_pretrained(&lex, 7, 9, &SynthConfig::default()).is_err());
    }

    #[test]
    fn synonyms_closer_than_other_groups() {
        let lex = SynonymLexicon::default();
        for noise in [0.0, 0.1, 0.2] {
            for seed in 0..4 {
                let cfg = SynthConfig { intra_noise: noise, ..SynthConfig::default() };
                let t = synth_pretrained(&lex, 16, seed, &cfg).unwrap();
                let s = crate::embeddings::cluster_stats(&t, &lex).unwrap();
                assert!(s.intra_mean > s.inter_mean, "noise {noise} seed {seed}: {s:?}");
            }
        }
    }
}
