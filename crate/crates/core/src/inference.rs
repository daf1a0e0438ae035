//! Greedy and beam decoding over any next-token scorer.

use serde::{Deserialize, Serialize};

use crate::autodiff::Mat;
use crate::corpus::{GlossSequence, Sentence, Vocabulary};
use crate::model::{sequence_logprob, Seq2SeqModel, Transformer};

/// Anything that can score the next target token given the tokens
/// generated so far.
pub trait StepScorer {
    /// Log-probabilities over the target vocabulary after `prefix`.
    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64>;

    fn eos(&self) -> usize {
        Vocabulary::EOS_ID
    }
}

/// Deterministic scorer for one source sentence: the encoder runs once and
/// the decoder is re-run over each prefix.
pub struct TransformerScorer<'a> {
    net: &'a Transformer,
    memory: Mat,
}

impl<'a> TransformerScorer<'a> {
    pub fn new(net: &'a Transformer, src: &[usize]) -> Self {
        TransformerScorer { net, memory: net.memory(src) }
    }
}

impl StepScorer for TransformerScorer<'_> {
    fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self.net.next_log_probs(&self.memory, prefix)
    }
}

/// A decoded sequence. `tokens` excludes EOS; `finished` is false when
/// decoding hit `max_len` first.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub logprob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Generated steps, counting EOS when present.
    pub fn steps(&self) -> usize {
        self.tokens.len() + usize::from(self.finished)
    }

    /// `logprob / steps^α`.
    pub fn score(&self, length_penalty: f64) -> f64 {
        let len = self.steps().max(1) as f64;
        self.logprob / len.powf(length_penalty)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Takes the most probable token at every step (lowest id on ties) for at
/// most `max_len` steps.
pub fn greedy_decode(scorer: &dyn StepScorer, max_len: usize) -> Hypothesis {
    let eos = scorer.eos();
    let mut hyp = Hypothesis { tokens: Vec::new(), logprob: 0.0, finished: false };
    for _ in 0..max_len {
        let lp = scorer.next_log_probs(&hyp.tokens);
        let next = argmax(&lp);
        hyp.logprob += lp[next];
        if next == eos {
            hyp.finished = true;
            break;
        }
        hyp.tokens.push(next);
    }
    hyp
}

/// Beam search. Each step pools the finished hypotheses with every
/// one-token expansion of the active ones and keeps the `width` best by raw
/// log-probability; finished hypotheses stay in the pool unchanged. The
/// result is the finished hypothesis with the best length-penalized score,
/// or the most probable partial one if none finished within `max_len`.
pub fn beam_search(scorer: &dyn StepScorer, width: usize, length_penalty: f64, max_len: usize) -> Hypothesis {
    assert!(width >= 1, "beam width must be positive");
    let eos = scorer.eos();
    let mut beam = vec![Hypothesis { tokens: Vec::new(), logprob: 0.0, finished: false }];
    for _ in 0..max_len {
        if beam.iter().all(|h| h.finished) {
            break;
        }
        let mut pool = Vec::new();
        for hyp in beam {
            if hyp.finished {
                pool.push(hyp);
                continue;
            }
            let lp = scorer.next_log_probs(&hyp.tokens);
            for (id, &l) in lp.iter().enumerate() {
                let mut next = hyp.clone();
                next.logprob += l;
                if id == eos {
                    next.finished = true;
                } else {
                    next.tokens.push(id);
                }
                pool.push(next);
            }
        }
        // Stable sort keeps expansion order (parent rank, then token id) on ties.
        pool.sort_by(|a, b| b.logprob.total_cmp(&a.logprob));
        pool.truncate(width);
        beam = pool;
    }
    let best_finished = beam
        .iter()
        .filter(|h| h.finished)
        .fold(None::<&Hypothesis>, |best, h| match best {
            Some(b) if b.score(length_penalty) >= h.score(length_penalty) => Some(b),
            _ => Some(h),
        });
    match best_finished {
        Some(h) => h.clone(),
        None => beam.into_iter().next().expect("beam is never empty"),
    }
}

/// Decoding settings used for evaluation and annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub length_penalty: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_width: 3, length_penalty: 1.0 }
    }
}

impl DecodeConfig {
    pub const GREEDY: DecodeConfig = DecodeConfig { beam_width: 1, length_penalty: 1.0 };
}

/// Decodes one sentence with dropout disabled. Sources longer than the
/// model's `max_len` are cut to fit.
pub fn translate(model: &Seq2SeqModel, x: &Sentence, decode: &DecodeConfig) -> (GlossSequence, Hypothesis) {
    let max_len = model.config().max_len;
    let mut src = model.src_vocab.encode(x.tokens());
    src.truncate(max_len);
    let scorer = TransformerScorer::new(&model.net, &src);
    let hyp = if decode.beam_width <= 1 {
        greedy_decode(&scorer, max_len)
    } else {
        beam_search(&scorer, decode.beam_width, decode.length_penalty, max_len)
    };
    (GlossSequence::new(model.tgt_vocab.decode(&hyp.tokens)), hyp)
}

pub fn translate_all<'a, I>(model: &Seq2SeqModel, sentences: I, decode: &DecodeConfig) -> Vec<GlossSequence>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    sentences.into_iter().map(|x| translate(model, x, decode).0).collect()
}

/// Log-probability of `hyp` recomputed by teacher forcing, for checking
/// search scores against the model likelihood.
pub fn rescore(model: &Seq2SeqModel, x: &Sentence, hyp: &Hypothesis) -> f64 {
    let mut src = model.src_vocab.encode(x.tokens());
    src.truncate(model.config().max_len);
    if hyp.finished {
        return sequence_logprob(&model.net, &src, &hyp.tokens, None).0;
    }
    let Some((&last, init)) = hyp.tokens.split_last() else {
        return 0.0;
    };
    let (lp, dists) = sequence_logprob(&model.net, &src, init, None);
    let d = dists.last().expect("at least the EOS step");
    lp - d.prob(Vocabulary::EOS_ID).ln() + d.prob(last).ln()
}
