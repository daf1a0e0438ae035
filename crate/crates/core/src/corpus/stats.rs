use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{MonolingualCorpus, ParallelCorpus, Vocabulary};

/// Statistics for one side of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideStats {
    pub sentences: usize,
    /// Distinct token types in this corpus.
    pub vocab: usize,
    pub total_tokens: usize,
    /// Tokens absent from the reference vocabulary.
    pub total_oov: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub text: SideStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gloss: Option<SideStats>,
}

#[derive(Debug, Clone, Copy)]
pub enum CorpusView<'a> {
    Parallel(&'a ParallelCorpus),
    Monolingual(&'a MonolingualCorpus),
}

impl<'a> From<&'a ParallelCorpus> for CorpusView<'a> {
    fn from(c: &'a ParallelCorpus) -> Self {
        CorpusView::Parallel(c)
    }
}

impl<'a> From<&'a MonolingualCorpus> for CorpusView<'a> {
    fn from(c: &'a MonolingualCorpus) -> Self {
        CorpusView::Monolingual(c)
    }
}

fn side_stats<'t, I, S>(sequences: I, vocab: &Vocabulary) -> SideStats
where
    I: IntoIterator<Item = &'t [S]>,
    S: AsRef<str> + 't,
{
    let mut types = HashSet::new();
    let (mut sentences, mut total_tokens, mut total_oov) = (0, 0, 0);
    for seq in sequences {
        sentences += 1;
        total_tokens += seq.len();
        for t in seq {
            let t = t.as_ref();
            types.insert(t.to_owned());
            if !vocab.contains(t) {
                total_oov += 1;
            }
        }
    }
    SideStats {
        sentences,
        vocab: types.len(),
        total_tokens,
        total_oov,
    }
}

/// Sentence, type, token and OOV counts measured against reference
/// vocabularies (normally built from the training split). Gloss statistics
/// are reported only for parallel corpora when a gloss vocabulary is given.
pub fn corpus_stats<'a>(
    corpus: impl Into<CorpusView<'a>>,
    vocab_text: &Vocabulary,
    vocab_gloss: Option<&Vocabulary>,
) -> CorpusStats {
    match corpus.into() {
        CorpusView::Parallel(c) => CorpusStats {
            text: side_stats(c.texts().map(|s| s.tokens()), vocab_text),
            gloss: vocab_gloss.map(|v| side_stats(c.glosses().map(|g| g.tokens()), v)),
        },
        CorpusView::Monolingual(m) => CorpusStats {
            text: side_stats(m.sentences().iter().map(|s| s.tokens()), vocab_text),
            gloss: None,
        },
    }
}
