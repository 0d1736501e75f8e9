use serde::{Deserialize, Serialize};

use super::spec::ActionSpec;
use super::SimError;
use crate::embeddings::{Pos, SynonymLexicon};

/// `[BOS, verb, adjective, adverb, EOS]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Description {
    tokens: Vec<String>,
}

impl Description {
    /// Checks the five-element shape against `lexicon`.
    pub fn new(tokens: Vec<String>, lexicon: &SynonymLexicon) -> Result<Self, SimError> {
        let bad = |why: &str| SimError::Description(format!("{tokens:?}: {why}"));
        if tokens.len() != 5 {
            return Err(bad("expected 5 elements"));
        }
        if tokens[0] != lexicon.bos() || tokens[4] != lexicon.eos() {
            return Err(bad("must start with BOS and end with EOS"));
        }
        for (tok, pos) in tokens[1..4].iter().zip(Pos::ALL) {
            match lexicon.group_of(tok) {
                Some(g) if lexicon.groups[g].pos == pos => {}
                _ => return Err(bad(&format!("{tok:?} is not a {}", pos.name()))),
            }
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The three content words.
    pub fn words(&self) -> &[String] {
        &self.tokens[1..4]
    }
}

/// Description of `spec` using words from word set `set` (1..=5) in every slot.
pub fn describe(spec: &ActionSpec, set: usize, lexicon: &SynonymLexicon) -> Result<Description, SimError> {
    describe_with_sets(spec, [set; 3], lexicon)
}

/// Description of `spec` choosing the verb, adjective and adverb from the
/// given word sets.
pub fn describe_with_sets(
    spec: &ActionSpec,
    sets: [usize; 3],
    lexicon: &SynonymLexicon,
) -> Result<Description, SimError> {
    let labels = [spec.motion.group(), spec.target_color().group(), spec.speed.group()];
    let mut tokens = vec![lexicon.bos().to_string()];
    for (label, set) in labels.iter().zip(sets) {
        let w = lexicon
            .word(label, set)
            .ok_or_else(|| SimError::Description(format!("no word for group {label:?} in set {set}")))?;
        tokens.push(w.to_string());
    }
    tokens.push(lexicon.eos().to_string());
    Description::new(tokens, lexicon)
}

/// One cross-validation fold over word sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train_sets: Vec<usize>,
    pub test_set: usize,
}

impl Fold {
    pub fn new(index: usize) -> Result<Self, SimError> {
        if !(1..=5).contains(&index) {
            return Err(SimError::Config(format!("fold must be in 1..=5, got {index}")));
        }
        Ok(Self { index, train_sets: (1..=5).filter(|&s| s != index).collect(), test_set: index })
    }
}

/// Fold i tests on word set i and trains on the other four.
pub fn make_folds() -> Vec<Fold> {
    (1..=5).map(|i| Fold::new(i).expect("in range")).collect()
}
