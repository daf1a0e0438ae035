//! Rule-based pseudo-gloss annotation of monolingual text.
//!
//! Two rule sets are provided. The embedding rule set (used for Chinese)
//! maps each known word to its most similar gloss under cosine similarity.
//! The lemma rule set (used for German) lemmatizes known words and resolves
//! them to a gloss by case-insensitive match or by a unique compound gloss
//! containing the lemma. Both are per-token replacements, so the output
//! always has the length of the input.

mod de;
mod lexicon;
mod lemma;
mod zh;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{GlossSequence, MonolingualCorpus, Sentence};
use crate::error::{Error, Result};

pub use de::LemmaRules;
pub use lemma::LemmaTable;
pub use lexicon::{similarity, EmbeddingLexicon, LexiconMiss};
pub use zh::EmbeddingRules;

/// Which annotator produced a synthetic pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Rule,
    Model,
}

impl Source {
    /// The source-side tag token marking pairs of this provenance.
    pub fn tag(self) -> &'static str {
        match self {
            Source::Rule => crate::corpus::Vocabulary::TAG_RULE,
            Source::Model => crate::corpus::Vocabulary::TAG_MODEL,
        }
    }
}

/// A monolingual sentence with a pseudo gloss.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub text: Sentence,
    pub gloss: GlossSequence,
    pub source: Source,
    pub iteration: usize,
    /// Set when model decoding hit `max_len` before emitting EOS.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl SyntheticPair {
    /// Fraction of gloss tokens that are `<UNK>` (0 for an empty gloss).
    pub fn unk_fraction(&self) -> f64 {
        if self.gloss.is_empty() {
            return 0.0;
        }
        let unk = self
            .gloss
            .tokens()
            .iter()
            .filter(|t| *t == crate::corpus::Vocabulary::UNK)
            .count();
        unk as f64 / self.gloss.len() as f64
    }
}

/// Language-specific rule set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    De,
}

/// A ready-to-use rule annotator.
#[derive(Debug, Clone)]
pub enum RuleAnnotator {
    Embedding(EmbeddingRules),
    Lemma(LemmaRules),
}

impl RuleAnnotator {
    pub fn annotate(&self, text: &Sentence) -> GlossSequence {
        match self {
            RuleAnnotator::Embedding(r) => r.annotate(text),
            RuleAnnotator::Lemma(r) => r.annotate(text),
        }
    }
}

/// Annotates every sentence of `mono` with the rule set. The result is
/// index-aligned with the corpus; lexicon misses become `<UNK>`.
pub fn annotate_corpus_rule(mono: &MonolingualCorpus, rules: &RuleAnnotator) -> Vec<SyntheticPair> {
    mono.sentences()
        .iter()
        .map(|s| SyntheticPair {
            text: s.clone(),
            gloss: rules.annotate(s),
            source: Source::Rule,
            iteration: 0,
            truncated: false,
        })
        .collect()
}

/// Writes pairs as JSON lines.
pub fn write_synthetic(path: impl AsRef<Path>, pairs: &[SyntheticPair]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_synthetic(path: impl AsRef<Path>) -> Result<Vec<SyntheticPair>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
