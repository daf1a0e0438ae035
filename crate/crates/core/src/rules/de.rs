use super::lemma::LemmaTable;
use crate::corpus::{GlossSequence, Sentence, Vocabulary};

/// Lemma rules: in-vocabulary words are lemmatized, then resolved to the
/// gloss that equals the lemma case-insensitively, or failing that to the
/// single gloss that contains it as a strict substring (a compound). Words
/// that resolve to nothing, or to several compounds, become `<UNK>`.
#[derive(Debug, Clone)]
pub struct LemmaRules {
    words: Vocabulary,
    /// (gloss, lowercased gloss) in gloss-id order.
    glosses: Vec<(String, String)>,
    lemmas: LemmaTable,
}

impl LemmaRules {
    pub fn new(word_vocab: &Vocabulary, gloss_vocab: &Vocabulary, lemmas: LemmaTable) -> Self {
        LemmaRules {
            words: word_vocab.clone(),
            glosses: gloss_vocab
                .regular()
                .map(|(_, g)| (g.to_owned(), g.to_lowercase()))
                .collect(),
            lemmas,
        }
    }

    pub fn gloss_for(&self, word: &str) -> &str {
        if !self.words.contains(word) || Vocabulary::is_reserved(word) {
            return Vocabulary::UNK;
        }
        let folded = self.lemmas.lemmatize(word).to_lowercase();
        if let Some((g, _)) = self.glosses.iter().find(|(_, lower)| *lower == folded) {
            return g;
        }
        let mut compounds = self
            .glosses
            .iter()
            .filter(|(_, lower)| lower.len() > folded.len() && lower.contains(&folded));
        match (compounds.next(), compounds.next()) {
            (Some((g, _)), None) => g,
            _ => Vocabulary::UNK,
        }
    }

    pub fn annotate(&self, text: &Sentence) -> GlossSequence {
        GlossSequence::new(text.tokens().iter().map(|w| self.gloss_for(w).to_owned()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::toks;

    fn annotate(words: &[&str], glosses: &[&str], lemmas: &[(&str, &str)], text: &str) -> Vec<String> {
        let rules = LemmaRules::new(
            &Vocabulary::from_tokens(words.iter().copied()).unwrap(),
            &Vocabulary::from_tokens(glosses.iter().copied()).unwrap(),
            LemmaTable::new(lemmas.iter().copied()).unwrap(),
        );
        rules.annotate(&Sentence::new(toks(text)).unwrap()).into_tokens()
    }

    #[test]
    fn lemma_then_case_folded_match() {
        let out = annotate(&["regnet"], &["REGNEN", "SONNE"], &[("regnet", "regnen")], "regnet");
        assert_eq!(out, ["REGNEN"]);
    }

    #[test]
    fn oov_word_is_unk() {
        let out = annotate(&["regnet"], &["REGNEN"], &[], "nordwind_oov");
        assert_eq!(out, ["<UNK>"]);
    }

    #[test]
    fn unique_compound_match() {
        let out = annotate(&["nord"], &["NORDWEST"], &[], "nord");
        assert_eq!(out, ["NORDWEST"]);
    }

    #[test]
    fn ambiguous_compound_is_left_unresolved() {
        let out = annotate(&["nord", "süd"], &["NORDWEST", "NORDOST", "SÜD"], &[], "nord süd");
        assert_eq!(out, ["<UNK>", "SÜD"]);
    }

    #[test]
    fn exact_match_wins_over_compounds() {
        let out = annotate(&["wind"], &["NORDWIND", "WIND"], &[], "wind");
        assert_eq!(out, ["WIND"]);
    }

    #[test]
    fn output_length_matches_input() {
        let out = annotate(&["a", "b"], &["A"], &[], "a b zz a");
        assert_eq!(out.len(), 4);
        assert_eq!(out, ["A", "<UNK>", "<UNK>", "A"]);
    }
}
