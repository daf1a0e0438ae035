//! Transformer encoder–decoder translating text token ids into gloss ids.

mod checkpoint;
mod config;
mod transformer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::TransformerConfig;
pub use transformer::{Noise, Transformer};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{softmax_in_place, Tape};
use crate::corpus::{GlossSequence, Sentence, Vocabulary};
use crate::error::Result;

/// Next-token distribution over the target vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    pub probabilities: Vec<f64>,
}

impl TokenDistribution {
    pub fn prob(&self, id: usize) -> f64 {
        self.probabilities[id]
    }
}

/// A network together with the vocabularies it was built for.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub net: Transformer,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

impl Seq2SeqModel {
    pub fn init(config: TransformerConfig, src_vocab: Vocabulary, tgt_vocab: Vocabulary, seed: u64) -> Result<Self> {
        let net = Transformer::new(config, src_vocab.len(), tgt_vocab.len(), seed)?;
        Ok(Seq2SeqModel { net, src_vocab, tgt_vocab })
    }

    pub fn config(&self) -> &TransformerConfig {
        self.net.config()
    }

    pub fn encode_pair(&self, x: &Sentence, y: &GlossSequence) -> Result<(Vec<usize>, Vec<usize>)> {
        let src = self.src_vocab.encode(x.tokens());
        let tgt = self.tgt_vocab.encode(y.tokens());
        self.net.check_lengths(src.len(), tgt.len())?;
        Ok((src, tgt))
    }

    /// `log p(y | x)` under teacher forcing plus the per-step distributions
    /// (one per gloss and one for EOS). `stochastic` carries the dropout
    /// seed; `None` runs deterministically.
    pub fn forward_logprob(
        &self,
        x: &Sentence,
        y: &GlossSequence,
        stochastic: Option<u64>,
    ) -> Result<(f64, Vec<TokenDistribution>)> {
        let (src, tgt) = self.encode_pair(x, y)?;
        Ok(sequence_logprob(&self.net, &src, &tgt, stochastic))
    }
}

/// Id-level form of [`Seq2SeqModel::forward_logprob`]; lengths are not checked.
pub fn sequence_logprob(
    net: &Transformer,
    src: &[usize],
    tgt: &[usize],
    stochastic: Option<u64>,
) -> (f64, Vec<TokenDistribution>) {
    let mut rng = stochastic.map(ChaCha8Rng::seed_from_u64);
    let mut tape = Tape::new(net.params());
    let (logits, targets) = net.teacher_forced(&mut tape, src, tgt, &mut rng.as_mut());
    let logits = tape.value(logits);
    let mut total = 0.0;
    let mut dists = Vec::with_capacity(targets.len());
    for (row, &target) in logits.rows().into_iter().zip(&targets) {
        let mut p = row.to_vec();
        softmax_in_place(&mut p);
        total += p[target].ln();
        dists.push(TokenDistribution { probabilities: p });
    }
    (total, dists)
}
