use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Verb,
    Adjective,
    Adverb,
}

impl Pos {
    pub const ALL: [Pos; 3] = [Pos::Verb, Pos::Adjective, Pos::Adverb];

    pub fn name(self) -> &'static str {
        match self {
            Pos::Verb => "verb",
            Pos::Adjective => "adj",
            Pos::Adverb => "adv",
        }
    }
}

/// One column of the word-set table: a label word and its five synonyms,
/// where member k belongs to word set k+1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymGroup {
    pub label: String,
    pub pos: Pos,
    pub members: [String; 5],
}

/// Whether BOS and EOS are two tokens or one shared symbol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolMode {
    #[default]
    Distinct,
    Merged,
}

pub const BOS: &str = "BOS";
pub const EOS: &str = "EOS";
pub const MERGED_SYMBOL: &str = "BOS/EOS";

const TABLE: [(&str, Pos, [&str; 5]); 8] = [
    ("pull", Pos::Verb, ["pull", "drag", "tug", "yank", "lug"]),
    ("push", Pos::Verb, ["push", "shove", "thrust", "jostle", "hustle"]),
    ("slide", Pos::Verb, ["slide", "glide", "slip", "shift", "skid"]),
    ("red", Pos::Adjective, ["red", "reddish", "cardinal", "coral", "flaming"]),
    ("green", Pos::Adjective, ["green", "greenish", "olive", "emerald", "chartreuse"]),
    ("yellow", Pos::Adjective, ["yellow", "yellowish", "cream", "amber", "tawny"]),
    ("slowly", Pos::Adverb, ["slowly", "leisurely", "gradually", "tardily", "steadily"]),
    ("fast", Pos::Adverb, ["fast", "speedily", "swiftly", "rapidly", "quickly"]),
];

/// The eight synonym groups (three verbs, three colour adjectives, two
/// speed adverbs) plus sentence symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymLexicon {
    pub groups: Vec<SynonymGroup>,
    pub symbols: SymbolMode,
}

impl Default for SynonymLexicon {
    fn default() -> Self {
        Self::standard(SymbolMode::Distinct)
    }
}

impl SynonymLexicon {
    pub fn standard(symbols: SymbolMode) -> Self {
        let groups = TABLE
            .iter()
            .map(|(label, pos, members)| SynonymGroup {
                label: label.to_string(),
                pos: *pos,
                members: members.map(str::to_string),
            })
            .collect();
        Self { groups, symbols }
    }

    pub fn bos(&self) -> &'static str {
        match self.symbols {
            SymbolMode::Distinct => BOS,
            SymbolMode::Merged => MERGED_SYMBOL,
        }
    }

    pub fn eos(&self) -> &'static str {
        match self.symbols {
            SymbolMode::Distinct => EOS,
            SymbolMode::Merged => MERGED_SYMBOL,
        }
    }

    pub fn symbols(&self) -> Vec<&'static str> {
        match self.symbols {
            SymbolMode::Distinct => vec![BOS, EOS],
            SymbolMode::Merged => vec![MERGED_SYMBOL],
        }
    }

    /// All tokens, groups contiguous in table order, symbols last.
    pub fn vocabulary(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.members.iter().cloned())
            .chain(self.symbols().into_iter().map(String::from))
            .collect()
    }

    pub fn group(&self, label: &str) -> Option<&SynonymGroup> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Index of the group a word belongs to, if any.
    pub fn group_of(&self, word: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.members.iter().any(|m| m == word))
    }

    /// Word set (1..=5) a word comes from.
    pub fn word_set_of(&self, word: &str) -> Option<usize> {
        self.groups.iter().find_map(|g| g.members.iter().position(|m| m == word).map(|i| i + 1))
    }

    /// Member of `label`'s group in word set `set` (1..=5).
    pub fn word(&self, label: &str, set: usize) -> Option<&str> {
        if !(1..=5).contains(&set) {
            return None;
        }
        self.group(label).map(|g| g.members[set - 1].as_str())
    }

    /// Row `set` of the word-set table.
    pub fn word_set(&self, set: usize) -> Vec<&str> {
        self.groups.iter().map(|g| g.members[set - 1].as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn table_shape() {
        let lex = SynonymLexicon::default();
        assert_eq!(lex.groups.len(), 8);
        let count = |p| lex.groups.iter().filter(|g| g.pos == p).count();
        assert_eq!((count(Pos::Verb), count(Pos::Adjective), count(Pos::Adverb)), (3, 3, 2));
        let words: HashSet<_> = lex.groups.iter().flat_map(|g| g.members.iter()).collect();
        assert_eq!(words.len(), 40);
        assert_eq!(lex.vocabulary().len(), 42);
        assert_eq!(SynonymLexicon::standard(SymbolMode::Merged).vocabulary().len(), 41);
    }

    #[test]
    fn word_set_rows() {
        let lex = SynonymLexicon::default();
        assert_eq!(lex.word_set(1), ["pull", "push", "slide", "red", "green", "yellow", "slowly", "fast"]);
        assert_eq!(
            lex.word_set(3),
            ["tug", "thrust", "slip", "cardinal", "olive", "cream", "gradually", "swiftly"]
        );
        assert_eq!(lex.word("fast", 5), Some("quickly"));
        assert_eq!(lex.word_set_of("emerald"), Some(4));
        assert_eq!(lex.group_of("tawny"), Some(5));
        assert_eq!(lex.word("fast", 6), None);
    }
}
