mod common;

use common::decode::{enumerate_best, GardenPath, HashScorer};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slg::corpus::{Sentence, Vocabulary};
use slg::inference::*;
use slg::model::{Seq2SeqModel, TransformerConfig};

#[test]
fn width_three_finds_the_enumerated_optimum_where_greedy_fails() {
    for alpha in [0.0, 1.0] {
        let best = enumerate_best(&GardenPath, 3, alpha).unwrap();
        let beam = beam_search(&GardenPath, 3, alpha, 3);
        assert_eq!(beam.tokens, best.tokens, "alpha {alpha}");
        assert!((beam.score(alpha) - best.score(alpha)).abs() < 1e-12);
        let greedy = greedy_decode(&GardenPath, 3);
        assert_ne!(greedy.tokens, beam.tokens);
        assert!(beam.score(alpha) > greedy.score(alpha));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A beam wide enough to hold the whole tree is exact search.
    #[test]
    fn full_width_beam_is_exhaustive(seed in any::<u64>(), alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0)]) {
        let scorer = HashScorer { seed, vocab: 5, temperature: 3.0 };
        let best = enumerate_best(&scorer, 3, alpha).unwrap();
        let beam = beam_search(&scorer, 64, alpha, 3);
        prop_assert!(beam.finished);
        prop_assert!((beam.score(alpha) - best.score(alpha)).abs() < 1e-12);
    }

    #[test]
    fn width_one_is_greedy(seed in any::<u64>(), vocab in 4usize..9) {
        let scorer = HashScorer { seed, vocab, temperature: 2.0 };
        let b = beam_search(&scorer, 1, 1.0, 6);
        let g = greedy_decode(&scorer, 6);
        prop_assert_eq!(b, g);
    }

    #[test]
    fn search_logprob_is_the_sum_of_step_logprobs(seed in any::<u64>(), width in 1usize..4) {
        let scorer = HashScorer { seed, vocab: 6, temperature: 2.0 };
        let h = beam_search(&scorer, width, 1.0, 5);
        let mut total = 0.0;
        for t in 0..h.tokens.len() {
            total += scorer.next_log_probs(&h.tokens[..t])[h.tokens[t]];
        }
        if h.finished {
            total += scorer.next_log_probs(&h.tokens)[Vocabulary::EOS_ID];
        }
        prop_assert!((total - h.logprob).abs() < 1e-9);
    }
}

fn random_model(seed: u64) -> Seq2SeqModel {
    let config = TransformerConfig {
        layers: 2,
        embed_dim: 16,
        ffn_dim: 32,
        heads: 4,
        dropout_rate: 0.3,
        label_smoothing: 0.1,
        max_len: 8,
    };
    let src = Vocabulary::from_tokens((0..8).map(|i| format!("w{i}"))).unwrap();
    let tgt = Vocabulary::from_tokens((0..6).map(|i| format!("G{i}"))).unwrap();
    Seq2SeqModel::init(config, src, tgt, seed).unwrap()
}

fn random_sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let len = rng.gen_range(1..=6);
    common::sentence(&(0..len).map(|_| format!("w{}", rng.gen_range(0..8))).collect::<Vec<_>>().join(" "))
}

#[test]
fn transformer_width_one_equals_greedy_and_scores_agree() {
    let model = random_model(12);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let x = random_sentence(&mut rng);
        let src = model.src_vocab.encode(x.tokens());
        let scorer = TransformerScorer::new(&model.net, &src);
        let g = greedy_decode(&scorer, 8);
        assert_eq!(beam_search(&scorer, 1, 1.0, 8), g);
        let (_, b) = translate(&model, &x, &DecodeConfig::default());
        assert!((rescore(&model, &x, &b) - b.logprob).abs() < 1e-5);
        assert!((rescore(&model, &x, &g) - g.logprob).abs() < 1e-5);
    }
}

#[test]
fn decoding_is_repeatable() {
    let model = random_model(3);
    let x = common::sentence("w1 w2 w3");
    let a = translate(&model, &x, &DecodeConfig::default());
    let b = translate(&model, &x, &DecodeConfig::default());
    assert_eq!(a, b);
}

#[test]
fn trained_copy_model_echoes_its_input() {
    let model = common::copy_model();
    for line in common::copy_sentences(30, 99) {
        let (out, hyp) = translate(&model, &common::sentence(&line), &DecodeConfig::GREEDY);
        assert!(hyp.finished);
        assert_eq!(out.to_string(), line);
    }
}
