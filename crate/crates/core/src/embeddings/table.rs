use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EmbeddingError;

/// Word → vector map with a fixed dimension. Iteration follows insertion
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    entries: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Invalid("embedding dimension must be positive".into()));
        }
        Ok(Self { dim, entries: IndexMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(EmbeddingError::Invalid(format!(
                "vector for {word:?} has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Invalid(format!("non-finite value in vector for {word:?}")));
        }
        if self.entries.contains_key(&word) {
            return Err(EmbeddingError::Invalid(format!("duplicate word {word:?}")));
        }
        self.entries.insert(word, vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn lookup(&self, word: &str) -> Result<&[f64], EmbeddingError> {
        self.get(word).ok_or_else(|| EmbeddingError::MissingWord(word.to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses the word2vec text format: a `<count> <dim>` header followed by
    /// one `word v1 … vdim` line per entry.
    pub fn parse_word2vec(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (header_no, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(EmbeddingError::MissingHeader)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().ok();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (parse_usize(c), parse_usize(d)) {
                (Some(c), Some(d)) if d > 0 => (c, d),
                _ => return Err(EmbeddingError::parse(header_no, format!("malformed header {header:?}"))),
            },
            _ => return Err(EmbeddingError::parse(header_no, format!("malformed header {header:?}"))),
        };
        let mut table = Self::new(dim)?;
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line has a token");
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|_| EmbeddingError::parse(no, format!("bad number {p:?}"))))
                .collect::<Result<_, _>>()?;
            if values.len() != dim {
                return Err(EmbeddingError::parse(
                    no,
                    format!("expected {dim} values for {word:?}, found {}", values.len()),
                ));
            }
            if table.contains(word) {
                return Err(EmbeddingError::parse(no, format!("duplicate word {word:?}")));
            }
            table.insert(word, values).map_err(|e| EmbeddingError::parse(no, e.to_string()))?;
        }
        if table.len() != count {
            return Err(EmbeddingError::parse(
                header_no,
                format!("header announces {count} entries, file has {}", table.len()),
            ));
        }
        Ok(table)
    }

    /// Renders the table in word2vec text format with round-trip decimals.
    pub fn to_word2vec(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (w, v) in self.iter() {
            out.push_str(w);
            for x in v {
                out.push(' ');
                out.push_str(&format!("{x:?}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EmbeddingError::Io(format!("{}: {e}", path.display())))?;
    EmbeddingTable::parse_word2vec(&text)
}
