//! The outer self-training loop: annotate monolingual text with the rules
//! and with the best model so far, mix the two with provenance tags, and
//! train a fresh model on gold plus synthetic data every iteration.

mod run;

pub use run::{
    train_supervised, IterationManifest, RunSummary, SelfTrainConfig, SelfTrainer, SyntheticCounts, MANIFEST_FILE,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{MonolingualCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::inference::{translate, DecodeConfig};
use crate::model::Seq2SeqModel;
use crate::rules::{Source, SyntheticPair};

/// Which pseudo-labels feed pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticMode {
    /// Rule pairs in the first iteration, then a 50/50 rule/model mix.
    #[default]
    Mixed,
    RuleOnly,
    /// Model pairs only; the first iteration pre-trains on gold alone.
    ModelOnly,
}

/// Number of iterations and the pre-training epochs of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationSchedule {
    pub iterations: usize,
    pub first_pretrain_epochs: usize,
    pub epoch_growth: usize,
    pub synthetic: SyntheticMode,
    /// Synthetic pairs whose gloss has a larger share of `<UNK>` are dropped.
    pub max_unk_fraction: Option<f64>,
}

impl Default for IterationSchedule {
    fn default() -> Self {
        IterationSchedule {
            iterations: 4,
            first_pretrain_epochs: 15,
            epoch_growth: 10,
            synthetic: SyntheticMode::Mixed,
            max_unk_fraction: None,
        }
    }
}

impl IterationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if let Some(f) = self.max_unk_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("max_unk_fraction {f} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Pre-training epochs of iteration `k` (1-based).
    pub fn pretrain_epochs(&self, k: usize) -> usize {
        assert!(k >= 1, "iterations are numbered from 1");
        self.first_pretrain_epochs + self.epoch_growth * (k - 1)
    }
}

/// Pseudo-labelled pairs used in one iteration's pre-training. Every source
/// sentence starts with the tag of its pair's provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub pairs: Vec<SyntheticPair>,
    /// Iteration whose model produced the model-based pairs (`k − 1`).
    pub iteration: usize,
    pub mix_seed: u64,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn count(&self, source: Source) -> usize {
        self.pairs.iter().filter(|p| p.source == source).count()
    }

    pub fn rule_fraction(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.count(Source::Rule) as f64 / self.pairs.len() as f64
    }
}

/// Greedy (width 1) model annotation with dropout off. Pairs whose decode
/// ran into `max_len` are kept and flagged as truncated.
pub fn model_annotate(model: &Seq2SeqModel, mono: &MonolingualCorpus, iteration: usize) -> Vec<SyntheticPair> {
    mono.sentences()
        .iter()
        .map(|s| {
            let (gloss, hyp) = translate(model, s, &DecodeConfig::GREEDY);
            SyntheticPair {
                text: s.clone(),
                gloss,
                source: Source::Model,
                iteration,
                truncated: !hyp.finished,
            }
        })
        .collect()
}

fn tagged(pair: &SyntheticPair) -> SyntheticPair {
    SyntheticPair {
        text: pair.text.with_prefix(pair.source.tag()),
        ..pair.clone()
    }
}

/// Picks the rule or the model pair of every sentence with equal
/// probability and prefixes its tag. Without model pairs every rule pair is
/// kept.
pub fn mix_synthetic(
    rule: &[SyntheticPair],
    model_based: Option<&[SyntheticPair]>,
    iteration: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    let pairs = match model_based {
        None => rule.iter().map(tagged).collect(),
        Some(model) => {
            if model.len() != rule.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} rule pairs but {} model pairs",
                    rule.len(),
                    model.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rule.iter()
                .zip(model)
                .enumerate()
                .map(|(i, (r, m))| {
                    if r.text != m.text {
                        return Err(Error::LengthMismatch(format!("pair {i} is not aligned: {:?} vs {:?}", r.text.to_string(), m.text.to_string())));
                    }
                    Ok(tagged(if rng.gen_bool(0.5) { r } else { m }))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(SyntheticDataset { pairs, iteration, mix_seed: seed })
}

/// Tags every pair with its own source, without mixing.
pub fn tag_all(pairs: &[SyntheticPair], iteration: usize) -> SyntheticDataset {
    SyntheticDataset { pairs: pairs.iter().map(tagged).collect(), iteration, mix_seed: 0 }
}

/// Drops tagged pairs that do not fit `max_len` (source, or gloss plus EOS)
/// and, if set, those whose `<UNK>` share exceeds `max_unk_fraction`.
pub fn filter_synthetic(dataset: &mut SyntheticDataset, max_len: usize, max_unk_fraction: Option<f64>) -> usize {
    let before = dataset.pairs.len();
    dataset.pairs.retain(|p| {
        p.text.len() <= max_len
            && p.gloss.len() < max_len
            && max_unk_fraction.map_or(true, |f| p.unk_fraction() <= f)
    });
    before - dataset.pairs.len()
}

/// Stable seed for one purpose within one iteration.
pub(crate) fn derive_seed(base: u64, iteration: usize, purpose: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = base ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ purpose.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// True if `token` is one of the provenance tags.
pub fn is_tag(token: &str) -> bool {
    token == Vocabulary::TAG_RULE || token == Vocabulary::TAG_MODEL
}
