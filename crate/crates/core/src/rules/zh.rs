use super::lexicon::{dot, normalize, EmbeddingLexicon};
use crate::corpus::{GlossSequence, Sentence, Vocabulary};
use crate::error::{Error, Result};

/// Embedding-similarity rules: each in-vocabulary word becomes the gloss
/// whose normalized embedding has the largest dot product with its own.
#[derive(Debug, Clone)]
pub struct EmbeddingRules {
    words: Vocabulary,
    /// (gloss, normalized embedding) in gloss-id order.
    glosses: Vec<(String, Vec<f64>)>,
    lexicon: EmbeddingLexicon,
}

impl EmbeddingRules {
    /// Fails if any regular gloss in `gloss_vocab` has no embedding.
    pub fn new(word_vocab: &Vocabulary, gloss_vocab: &Vocabulary, lexicon: EmbeddingLexicon) -> Result<Self> {
        let glosses = gloss_vocab
            .regular()
            .map(|(_, g)| {
                lexicon
                    .get(g)
                    .map(|v| (g.to_owned(), normalize(v)))
                    .ok_or_else(|| Error::MissingGlossEmbedding(g.to_owned()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingRules {
            words: word_vocab.clone(),
            glosses,
            lexicon,
        })
    }

    /// Most similar gloss for one word, or `None` if the word is outside the
    /// word vocabulary or the lexicon.
    pub fn closest_gloss(&self, word: &str) -> Option<&str> {
        if !self.words.contains(word) || Vocabulary::is_reserved(word) {
            return None;
        }
        let w = self.lexicon.normalized(word).ok()?;
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, g)) in self.glosses.iter().enumerate() {
            let s = dot(&w, g);
            // strict `>` keeps the lowest gloss id on ties
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| self.glosses[i].0.as_str())
    }

    pub fn annotate(&self, text: &Sentence) -> GlossSequence {
        GlossSequence::new(
            text.tokens()
                .iter()
                .map(|w| self.closest_gloss(w).unwrap_or(Vocabulary::UNK).to_owned())
                .collect(),
        )
    }
}
