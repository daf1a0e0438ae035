#![allow(dead_code)]

use slg::corpus::{GlossSequence, ParallelCorpus, Sentence, Vocabulary};
use slg::model::{Seq2SeqModel, Transformer, TransformerConfig};
use slg::training::{example_loss, train_stage_one, AugmentConfig, PassSeeds, RampSchedule, Session, StageConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sentence(line: &str) -> Sentence {
    Sentence::new(line.split_whitespace().map(String::from).collect()).unwrap()
}

pub fn gloss(line: &str) -> GlossSequence {
    GlossSequence::new(line.split_whitespace().map(String::from).collect())
}

pub const COPY_WORDS: [&str; 5] = ["a", "b", "c", "d", "e"];

pub fn copy_sentences(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=4);
            (0..len).map(|_| COPY_WORDS[rng.gen_range(0..COPY_WORDS.len())]).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

/// A small transformer trained until greedy decoding copies its input.
pub fn copy_model() -> Seq2SeqModel {
    let vocab = Vocabulary::from_tokens(COPY_WORDS).unwrap();
    let config = TransformerConfig {
        layers: 1,
        embed_dim: 32,
        ffn_dim: 64,
        heads: 4,
        dropout_rate: 0.0,
        label_smoothing: 0.0,
        max_len: 12,
    };
    let mut model = Seq2SeqModel::init(config, vocab.clone(), vocab, 3).unwrap();
    let pairs = copy_sentences(800, 1).iter().map(|l| (sentence(l), gloss(l))).collect();
    let gold = ParallelCorpus::new(pairs).unwrap();
    let stage = StageConfig { learning_rate: 3e-3, batch_size: 16, consistency: false, ..Default::default() };
    let mut session = Session::new(1, RampSchedule::new(0.0, 1).unwrap());
    let augment = AugmentConfig { enabled: false, ..Default::default() };
    train_stage_one(&mut model, &gold, &[], 30, &stage, &augment, &mut session, 5).unwrap();
    model
}

/// Central-difference check of every gradient of the combined loss on a
/// 2-layer, dim-8, |V|=11 model. Both dropout masks are frozen through fixed
/// seeds. Returns the global relative error, or the first entry whose
/// relative error exceeds 1e-3.
pub fn gradient_check() -> Result<f64, String> {
    let config = TransformerConfig {
        layers: 2,
        embed_dim: 8,
        ffn_dim: 16,
        heads: 2,
        dropout_rate: 0.2,
        label_smoothing: 0.1,
        max_len: 10,
    };
    let mut net = Transformer::new(config, 11, 11, 21).unwrap();
    let (src, tgt) = ([6usize, 9, 7, 10, 8], [7usize, 10, 6, 9]);
    let seeds = PassSeeds(31, 32);
    let w = 7.5;
    let mut grads = net.params().zero_grads();
    example_loss(&net, &src, &tgt, w, true, seeds, Some((&mut grads, 1.0)));

    let h = 1e-4;
    let ids: Vec<_> = net.params().iter().map(|(id, _, _)| id).collect();
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for id in ids {
        let shape = net.params().get(id).dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = net.params().get(id)[[r, c]];
                net.params_mut().get_mut(id)[[r, c]] = orig + h;
                let plus = example_loss(&net, &src, &tgt, w, true, seeds, None).total;
                net.params_mut().get_mut(id)[[r, c]] = orig - h;
                let minus = example_loss(&net, &src, &tgt, w, true, seeds, None).total;
                net.params_mut().get_mut(id)[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads.get(id)[[r, c]];
                diff2 += (numeric - analytic).powi(2);
                norm2 += numeric.powi(2) + analytic.powi(2);
                // Entries near zero are judged on an absolute floor.
                if (numeric - analytic).abs() > 1e-3 * numeric.abs().max(analytic.abs()) + 1e-6 {
                    return Err(format!("param {id:?}[{r},{c}]: numeric {numeric} analytic {analytic}"));
                }
            }
        }
    }
    Ok((diff2 / norm2).sqrt())
}

pub mod oracle {
    /// Straightforward re-implementations used as oracles: n-grams are
    /// materialized as strings and counted by linear scans.
        pub fn ngrams(items: &[String], n: usize) -> Vec<String> {
            if items.len() < n {
                return vec![];
            }
            (0..=items.len() - n).map(|i| items[i..i + n].join("\u{1}")).collect()
        }

        fn count(xs: &[String], x: &str) -> usize {
            xs.iter().filter(|y| *y == x).count()
        }

        /// (clipped matches, hypothesis total, reference total)
        pub fn stats(h: &[String], r: &[String], n: usize) -> (f64, f64, f64) {
            let (hg, rg) = (ngrams(h, n), ngrams(r, n));
            let mut seen: Vec<&String> = Vec::new();
            let mut m = 0;
            for g in &hg {
                if !seen.contains(&g) {
                    seen.push(g);
                    m += count(&hg, g).min(count(&rg, g));
                }
            }
            (m as f64, hg.len() as f64, rg.len() as f64)
        }

        pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], n: usize) -> f64 {
            let mut logs = Vec::new();
            for k in 1..=n {
                let (mut m, mut t) = (0.0, 0.0);
                for (h, r) in hyps.iter().zip(refs) {
                    let s = stats(h, r, k);
                    m += s.0;
                    t += s.1;
                }
                if m == 0.0 {
                    return 0.0;
                }
                logs.push((m / t).ln());
            }
            let c: usize = hyps.iter().map(Vec::len).sum();
            let r: usize = refs.iter().map(Vec::len).sum();
            let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
            100.0 * bp * (logs.iter().sum::<f64>() / n as f64).exp()
        }

        pub fn chars(s: &[String]) -> Vec<String> {
            s.concat().chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
        }

        pub fn chrf(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
            let (mut ps, mut rs, mut orders) = (0.0, 0.0, 0.0);
            for n in 1..=6 {
                let (mut m, mut th, mut tr) = (0.0, 0.0, 0.0);
                for (h, r) in hyps.iter().zip(refs) {
                    let s = stats(&chars(h), &chars(r), n);
                    m += s.0;
                    th += s.1;
                    tr += s.2;
                }
                if th + tr == 0.0 {
                    continue;
                }
                orders += 1.0;
                if th > 0.0 {
                    ps += m / th;
                }
                if tr > 0.0 {
                    rs += m / tr;
                }
            }
            if orders == 0.0 {
                return 100.0;
            }
            let (p, r) = (ps / orders, rs / orders);
            if p + r == 0.0 {
                return 0.0;
            }
            100.0 * 5.0 * p * r / (4.0 * p + r)
        }
}

pub mod decode {
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use slg::autodiff::log_softmax_in_place;
    use slg::corpus::Vocabulary;
    use slg::inference::{Hypothesis, StepScorer};

    /// Deterministic pseudo-random next-token distributions over
    /// `{EOS} ∪ {3, …, vocab−1}`; PAD and BOS are never produced.
    pub struct HashScorer {
        pub seed: u64,
        pub vocab: usize,
        /// Larger values make the distributions peakier.
        pub temperature: f64,
    }

    impl StepScorer for HashScorer {
        fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            let mut h = DefaultHasher::new();
            (self.seed, prefix).hash(&mut h);
            let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
            let mut logits: Vec<f64> = (0..self.vocab)
                .map(|i| if i == Vocabulary::PAD_ID || i == Vocabulary::BOS_ID { f64::NEG_INFINITY } else { self.temperature * rng.gen_range(-1.0..1.0) })
                .collect();
            log_softmax_in_place(&mut logits);
            logits
        }
    }

    /// Best length-penalized finished hypothesis by walking the whole tree.
    pub fn enumerate_best(scorer: &dyn StepScorer, max_len: usize, alpha: f64) -> Option<Hypothesis> {
        let mut best: Option<Hypothesis> = None;
        let mut frontier = vec![Hypothesis { tokens: vec![], logprob: 0.0, finished: false }];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for h in frontier {
                for (id, l) in scorer.next_log_probs(&h.tokens).into_iter().enumerate() {
                    if l == f64::NEG_INFINITY {
                        continue;
                    }
                    if id == scorer.eos() {
                        let done = Hypothesis { tokens: h.tokens.clone(), logprob: h.logprob + l, finished: true };
                        if best.as_ref().map_or(true, |b| done.score(alpha) > b.score(alpha)) {
                            best = Some(done);
                        }
                    } else {
                        let mut t = h.tokens.clone();
                        t.push(id);
                        next.push(Hypothesis { tokens: t, logprob: h.logprob + l, finished: false });
                    }
                }
            }
            frontier = next;
        }
        best
    }

    /// Three-step table model: greedy takes `a` (0.5) into a flat region,
    /// while `b` (0.3) then `a` (0.9) then EOS (0.95) is the best sequence.
    pub struct GardenPath;

    impl StepScorer for GardenPath {
        fn next_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
            const A: usize = 3;
            const B: usize = 4;
            let p: [f64; 3] = match prefix {
                [] => [0.2, 0.5, 0.3],
                [A] => [0.34, 0.33, 0.33],
                [A, _] => [0.4, 0.3, 0.3],
                [B] => [0.05, 0.9, 0.05],
                [B, A] => [0.95, 0.025, 0.025],
                [B, B] => [0.5, 0.25, 0.25],
                _ => [1.0, 0.0, 0.0],
            };
            vec![f64::NEG_INFINITY, f64::NEG_INFINITY, p[0].ln(), p[1].ln(), p[2].ln()]
        }
    }
}

pub mod rules {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use slg::corpus::{Sentence, Vocabulary};
    use slg::rules::EmbeddingLexicon;

    pub struct Fixture {
        pub words: Vocabulary,
        pub glosses: Vocabulary,
        pub lexicon: EmbeddingLexicon,
    }

    pub fn fixture(seed: u64, scale: f64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 6;
        let mut lexicon = EmbeddingLexicon::new(dim);
        let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let glosses: Vec<String> = (0..30).map(|i| format!("G{i}")).collect();
        for t in words.iter().chain(&glosses) {
            lexicon.insert(t.clone(), vec(&mut rng)).unwrap();
        }
        Fixture {
            words: Vocabulary::from_tokens(&words).unwrap(),
            glosses: Vocabulary::from_tokens(&glosses).unwrap(),
            lexicon,
        }
    }

    /// Argmax of the normalized dot product over the full gloss vocabulary,
    /// computed from scratch.
    pub fn brute_force(f: &Fixture, word: &str) -> String {
        if !f.words.contains(word) {
            return Vocabulary::UNK.into();
        }
        let Some(w) = f.lexicon.get(word) else { return Vocabulary::UNK.into() };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut best = (f64::NEG_INFINITY, String::new());
        for (_, g) in f.glosses.regular() {
            let u = f.lexicon.get(g).unwrap();
            let s = w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / (norm(w) * norm(u));
            if s > best.0 {
                best = (s, g.to_string());
            }
        }
        best.1
    }

    pub fn random_sentence(rng: &mut ChaCha8Rng) -> Sentence {
        let len = rng.gen_range(1..=10);
        let toks = (0..len)
            .map(|_| if rng.gen_bool(0.15) { format!("oov{}", rng.gen_range(0..5)) } else { format!("w{}", rng.gen_range(0..50)) })
            .collect();
        Sentence::new(toks).unwrap()
    }
}
