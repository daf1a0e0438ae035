use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary};

/// Word dropping and local shuffling applied to synthetic source sentences
/// during pre-training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub p_drop: f64,
    pub window: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { enabled: true, p_drop: 0.1, window: 3 }
    }
}

/// Drops each token after the first `pinned` ones with probability
/// `p_drop` (restoring one at random if all would go), then shuffles the
/// survivors by sorting on `position + U[0, window)`. Pinned tokens stay in
/// place.
pub fn augment<T: Clone, R: Rng + ?Sized>(tokens: &[T], pinned: usize, rng: &mut R, p_drop: f64, window: usize) -> Vec<T> {
    let pinned = pinned.min(tokens.len());
    let body = &tokens[pinned..];
    let mut kept: Vec<usize> = (0..body.len()).filter(|_| !rng.gen_bool(p_drop.clamp(0.0, 1.0))).collect();
    if kept.is_empty() && !body.is_empty() {
        kept.push(rng.gen_range(0..body.len()));
    }
    let mut keyed: Vec<(f64, usize)> = kept
        .into_iter()
        .map(|i| {
            let jitter = if window > 1 { rng.gen_range(0.0..window as f64) } else { 0.0 };
            (i as f64 + jitter, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = tokens[..pinned].to_vec();
    out.extend(keyed.into_iter().map(|(_, i)| body[i].clone()));
    out
}

/// Number of leading provenance tags in a token-id sequence.
pub fn tag_prefix_len(ids: &[usize]) -> usize {
    usize::from(matches!(ids.first(), Some(&(Vocabulary::TAG_RULE_ID | Vocabulary::TAG_MODEL_ID))))
}

/// [`augment`] on a sentence, keeping a leading tag token fixed.
pub fn augment_sentence<R: Rng + ?Sized>(x: &Sentence, rng: &mut R, p_drop: f64, window: usize) -> Sentence {
    let tokens = x.tokens();
    let pinned = usize::from(matches!(
        tokens.first().map(String::as_str),
        Some(Vocabulary::TAG_RULE | Vocabulary::TAG_MODEL)
    ));
    Sentence::new(augment(tokens, pinned, rng, p_drop, window)).expect("augmentation keeps a token")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::toks;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_op_parameters_are_identity() {
        let x = Sentence::new(toks("<rule> a b c d")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment_sentence(&x, &mut rng, 0.0, 1), x);
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let x = Sentence::new(toks("a b c d e f g")).unwrap();
        let run = |s| augment_sentence(&x, &mut ChaCha8Rng::seed_from_u64(s), 0.3, 3);
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn dropping_everything_keeps_one_token() {
        let ids = [4usize, 10, 11, 12];
        let out = augment(&ids, 1, &mut ChaCha8Rng::seed_from_u64(1), 1.0, 3);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], 4);
    }

    proptest! {
        #[test]
        fn length_bounds_and_pinned_tag(
            body in proptest::collection::vec(10usize..20, 1..12),
            seed in any::<u64>(),
            p in 0.0f64..1.0,
            window in 0usize..5,
        ) {
            let mut ids = vec![Vocabulary::TAG_MODEL_ID];
            ids.extend(&body);
            let out = augment(&ids, tag_prefix_len(&ids), &mut ChaCha8Rng::seed_from_u64(seed), p, window);
            prop_assert!(out.len() >= 2 && out.len() <= ids.len());
            prop_assert_eq!(out[0], Vocabulary::TAG_MODEL_ID);
            // Survivors are a sub-multiset of the original body.
            let mut rest = body.clone();
            for t in &out[1..] {
                let pos = rest.iter().position(|x| x == t);
                prop_assert!(pos.is_some());
                rest.remove(pos.unwrap());
            }
        }

        #[test]
        fn shuffle_moves_tokens_less_than_window(body in proptest::collection::vec(0usize..1000, 1..15), seed in any::<u64>(), window in 1usize..5) {
            let distinct: Vec<usize> = (0..body.len()).collect();
            let out = augment(&distinct, 0, &mut ChaCha8Rng::seed_from_u64(seed), 0.0, window);
            for (pos, &orig) in out.iter().enumerate() {
                prop_assert!((pos as i64 - orig as i64).unsigned_abs() < window as u64);
            }
        }
    }
}
