//! Parallel and monolingual corpora, tokenization and vocabularies.

mod io;
mod stats;
mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_monolingual_corpus, load_parallel_corpus, parse_monolingual, parse_parallel,
    CorpusFormat,
};
pub use stats::{corpus_stats, CorpusStats, CorpusView, SideStats};
pub use vocab::{build_vocabulary, Side, Vocabulary};

/// How raw lines are split into tokens.
///
/// Gold corpora ship pre-segmented, so whitespace is the default. `Char`
/// treats every non-whitespace character as a token, which is the usual
/// choice for unsegmented Chinese text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    #[default]
    Whitespace,
    Char,
}

impl Tokenizer {
    pub fn tokenize(self, line: &str) -> Vec<String> {
        match self {
            Tokenizer::Whitespace => line.split_whitespace().map(str::to_owned).collect(),
            Tokenizer::Char => line
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(String::from)
                .collect(),
        }
    }
}

/// A tokenized spoken-language sentence. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Config("sentence must contain at least one token".into()));
        }
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(Error::Config(format!("invalid token {bad:?}")));
        }
        Ok(Sentence(tokens))
    }

    pub fn parse(line: &str, tokenizer: Tokenizer) -> Result<Self> {
        Self::new(tokenizer.tokenize(line))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Returns a copy with `tag` prepended.
    pub fn with_prefix(&self, tag: &str) -> Sentence {
        let mut tokens = Vec::with_capacity(self.0.len() + 1);
        tokens.push(tag.to_owned());
        tokens.extend(self.0.iter().cloned());
        Sentence(tokens)
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl Serialize for Sentence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.join(" "))
    }
}

impl<'de> Deserialize<'de> for Sentence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let line = String::deserialize(d)?;
        Sentence::parse(&line, Tokenizer::Whitespace).map_err(serde::de::Error::custom)
    }
}

/// A gloss sequence; may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct GlossSequence(Vec<String>);

impl GlossSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        GlossSequence(tokens)
    }

    pub fn parse(line: &str, tokenizer: Tokenizer) -> Self {
        GlossSequence(tokenizer.tokenize(line))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for GlossSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl Serialize for GlossSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.join(" "))
    }
}

impl<'de> Deserialize<'de> for GlossSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let line = String::deserialize(d)?;
        Ok(GlossSequence::parse(&line, Tokenizer::Whitespace))
    }
}

/// Gold text–gloss pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    pairs: Vec<(Sentence, GlossSequence)>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Sentence, GlossSequence)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn pairs(&self) -> &[(Sentence, GlossSequence)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(x, _)| x)
    }

    pub fn glosses(&self) -> impl Iterator<Item = &GlossSequence> {
        self.pairs.iter().map(|(_, y)| y)
    }
}

/// Unlabeled spoken-language sentences. May be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonolingualCorpus {
    sentences: Vec<Sentence>,
}

impl MonolingualCorpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        MonolingualCorpus { sentences }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[cfg(test)]
pub(crate) fn toks(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_rejects_empty_and_blank_tokens() {
        assert!(Sentence::new(vec![]).is_err());
        assert!(Sentence::new(vec!["a".into(), "".into()]).is_err());
        assert!(Sentence::parse("   ", Tokenizer::Whitespace).is_err());
        assert_eq!(Sentence::parse(" a  b ", Tokenizer::Whitespace).unwrap().len(), 2);
    }

    #[test]
    fn char_tokenizer_splits_characters() {
        assert_eq!(Tokenizer::Char.tokenize("我 爱你"), vec!["我", "爱", "你"]);
    }

    #[test]
    fn prefix_tag() {
        let s = Sentence::new(toks("a b")).unwrap();
        assert_eq!(s.with_prefix("<rule>").tokens(), &toks("<rule> a b")[..]);
    }
}
