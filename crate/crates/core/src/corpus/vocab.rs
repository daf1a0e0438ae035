use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ParallelCorpus;
use crate::error::{Error, Result};

/// Which side of a parallel corpus a vocabulary is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Text,
    Gloss,
}

/// Bijective token ↔ id map. The reserved tokens always occupy ids `0..6`
/// in the order of [`Vocabulary::RESERVED`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

impl Vocabulary {
    pub const PAD: &'static str = "<PAD>";
    pub const BOS: &'static str = "<BOS>";
    pub const EOS: &'static str = "<EOS>";
    pub const UNK: &'static str = "<UNK>";
    pub const TAG_RULE: &'static str = "<rule>";
    pub const TAG_MODEL: &'static str = "<model>";
    pub const RESERVED: [&'static str; 6] = [
        Self::PAD,
        Self::BOS,
        Self::EOS,
        Self::UNK,
        Self::TAG_RULE,
        Self::TAG_MODEL,
    ];

    pub const PAD_ID: usize = 0;
    pub const BOS_ID: usize = 1;
    pub const EOS_ID: usize = 2;
    pub const UNK_ID: usize = 3;
    pub const TAG_RULE_ID: usize = 4;
    pub const TAG_MODEL_ID: usize = 5;

    /// Builds a vocabulary from reserved tokens followed by `tokens` in the
    /// given order. Duplicates and reserved spellings in `tokens` are rejected.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            id_to_token: Vec::new(),
            token_to_id: HashMap::new(),
        };
        for t in Self::RESERVED {
            vocab.push(t.to_owned())?;
        }
        for t in tokens {
            let t = t.into();
            if Self::is_reserved(&t) {
                return Err(Error::Config(format!("reserved token {t:?} listed as a regular entry")));
            }
            vocab.push(t)?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: String) -> Result<()> {
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(Error::Config(format!("invalid vocabulary token {token:?}")));
        }
        if self.token_to_id.contains_key(&token) {
            return Err(Error::Config(format!("duplicate vocabulary token {token:?}")));
        }
        self.token_to_id.insert(token.clone(), self.id_to_token.len());
        self.id_to_token.push(token);
        Ok(())
    }

    pub fn is_reserved(token: &str) -> bool {
        Self::RESERVED.contains(&token)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Number of entries excluding the reserved tokens.
    pub fn regular_len(&self) -> usize {
        self.len() - Self::RESERVED.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Regular (non-reserved) entries with their ids, in id order.
    pub fn regular(&self) -> impl Iterator<Item = (usize, &str)> {
        self.id_to_token
            .iter()
            .enumerate()
            .skip(Self::RESERVED.len())
            .map(|(i, t)| (i, t.as_str()))
    }

    /// Maps tokens to ids; anything unknown becomes `UNK_ID`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(Self::UNK_ID))
            .collect()
    }

    /// Maps ids back to tokens; out-of-range ids decode as `<UNK>`.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(Self::UNK).to_owned())
            .collect()
    }

    /// One token per line, reserved tokens first.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = self.id_to_token.join("\n");
        out.push('\n');
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = content.lines().map(str::to_owned).collect();
        Self::try_from(tokens)
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        let n = Self::RESERVED.len();
        if tokens.len() < n || tokens[..n].iter().zip(Self::RESERVED).any(|(a, b)| a != b) {
            return Err(Error::Config("vocabulary must start with the reserved tokens".into()));
        }
        Self::from_tokens(tokens.into_iter().skip(n))
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.id_to_token
    }
}

/// Counts tokens on one side of `corpus` and keeps those seen at least
/// `min_count` times, most frequent first, ties in lexicographic order.
pub fn build_vocabulary(corpus: &ParallelCorpus, side: Side, min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (text, gloss) in corpus.pairs() {
        let tokens = match side {
            Side::Text => text.tokens(),
            Side::Gloss => gloss.tokens(),
        };
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !Vocabulary::is_reserved(t))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{toks, GlossSequence, Sentence};
    use proptest::prelude::*;

    fn corpus(pairs: &[(&str, &str)]) -> ParallelCorpus {
        ParallelCorpus::new(
            pairs
                .iter()
                .map(|(x, y)| (Sentence::new(toks(x)).unwrap(), GlossSequence::new(toks(y))))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn gloss_vocabulary_thresholds() {
        let c = corpus(&[("a b", "X"), ("a", "X Y")]);
        let v1 = build_vocabulary(&c, Side::Gloss, 1).unwrap();
        assert_eq!(v1.regular().map(|(_, t)| t).collect::<Vec<_>>(), ["X", "Y"]);
        let v2 = build_vocabulary(&c, Side::Gloss, 2).unwrap();
        assert_eq!(v2.regular().map(|(_, t)| t).collect::<Vec<_>>(), ["X"]);
        assert_eq!(v2.len(), Vocabulary::RESERVED.len() + 1);
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = corpus(&[("c b a", "X"), ("a", "X")]);
        let v = build_vocabulary(&c, Side::Text, 1).unwrap();
        assert_eq!(v.regular().map(|(_, t)| t).collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn reserved_ids_are_lowest() {
        let v = Vocabulary::from_tokens(["x"]).unwrap();
        for (i, r) in Vocabulary::RESERVED.iter().enumerate() {
            assert_eq!(v.id(r), Some(i));
        }
        assert_eq!(v.id(Vocabulary::UNK), Some(Vocabulary::UNK_ID));
        assert_eq!(v.id(Vocabulary::TAG_MODEL), Some(Vocabulary::TAG_MODEL_ID));
        assert_eq!(v.id("x"), Some(6));
    }

    #[test]
    fn encodes_oov_as_unk() {
        let v = Vocabulary::from_tokens(["x", "y"]).unwrap();
        assert_eq!(v.encode(&["y", "zzz", "x"]), vec![7, Vocabulary::UNK_ID, 6]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let v = Vocabulary::from_tokens(["b", "a"]).unwrap();
        v.write(&path).unwrap();
        assert_eq!(Vocabulary::read(&path).unwrap(), v);
        std::fs::write(&path, "a\nb\n").unwrap();
        assert!(Vocabulary::read(&path).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in proptest::collection::vec("[a-e]{1,3}", 1..20)) {
            let mut uniq = words.clone();
            uniq.sort();
            uniq.dedup();
            let v = Vocabulary::from_tokens(uniq.iter().cloned()).unwrap();
            let ids = v.encode(&words);
            prop_assert_eq!(v.decode(&ids), words.clone());
            for w in &words {
                prop_assert_eq!(v.id(v.token(v.id(w).unwrap()).unwrap()), v.id(w));
            }
        }

        #[test]
        fn every_encoded_id_is_in_range(words in proptest::collection::vec("[a-z]{1,4}", 0..20)) {
            let v = Vocabulary::from_tokens(["abc", "q"]).unwrap();
            for id in v.encode(&words) {
                prop_assert!(v.token(id).is_some());
            }
        }
    }
}
