mod common;

use slg::corpus::{build_vocabulary, MonolingualCorpus, Side, Vocabulary};
use slg::inference::DecodeConfig;
use slg::model::TransformerConfig;
use slg::rules::{EmbeddingRules, RuleAnnotator, Source, SyntheticPair};
use slg::selftrain::*;
use slg::toy::{generate, ToyConfig};
use slg::training::{AugmentConfig, RampConfig, StageConfig};

fn aligned_pairs(n: usize) -> (Vec<SyntheticPair>, Vec<SyntheticPair>) {
    let make = |i: usize, source| SyntheticPair {
        text: common::sentence(&format!("w{i} x")),
        gloss: common::gloss(&format!("{source:?}{i}")),
        source,
        iteration: 0,
        truncated: false,
    };
    ((0..n).map(|i| make(i, Source::Rule)).collect(), (0..n).map(|i| make(i, Source::Model)).collect())
}

#[test]
fn mixing_is_balanced_tagged_and_aligned() {
    let (rule, model) = aligned_pairs(10_000);
    let mixed = mix_synthetic(&rule, Some(&model), 1, 42).unwrap();
    assert_eq!(mixed.len(), 10_000);
    let frac = mixed.rule_fraction();
    assert!((0.48..=0.52).contains(&frac), "{frac}");
    for (i, p) in mixed.pairs.iter().enumerate() {
        assert_eq!(p.text.tokens()[0], p.source.tag());
        // The chosen gloss belongs to the same sentence.
        assert_eq!(p.text.tokens()[1], format!("w{i}"));
        assert_eq!(p.gloss.tokens()[0], format!("{:?}{i}", p.source));
    }
    assert_eq!(mixed, mix_synthetic(&rule, Some(&model), 1, 42).unwrap());
    assert_ne!(mixed, mix_synthetic(&rule, Some(&model), 1, 43).unwrap());
}

#[test]
fn model_annotation_echoes_a_copy_model() {
    let model = common::copy_model();
    let lines = common::copy_sentences(25, 7);
    let mono = MonolingualCorpus::new(lines.iter().map(|l| common::sentence(l)).collect());
    let pairs = model_annotate(&model, &mono, 3);
    assert_eq!(pairs.len(), 25);
    for (p, l) in pairs.iter().zip(&lines) {
        assert_eq!(p.gloss.to_string(), *l);
        assert_eq!((p.source, p.iteration, p.truncated), (Source::Model, 3, false));
    }
    assert_eq!(pairs, model_annotate(&model, &mono, 3));
}

fn tiny_setup() -> (slg::toy::ToyData, SelfTrainConfig) {
    let toy = ToyConfig { concepts: 12, gold: 60, dev: 15, mono: 80, ..Default::default() };
    let data = generate(&toy).unwrap();
    let stage = StageConfig { learning_rate: 3e-3, batch_size: 16, patience: 1, max_epochs: 2, consistency: true };
    let config = SelfTrainConfig {
        model: TransformerConfig { layers: 1, embed_dim: 16, ffn_dim: 32, heads: 2, dropout_rate: 0.1, label_smoothing: 0.1, max_len: 16 },
        schedule: IterationSchedule { iterations: 2, first_pretrain_epochs: 1, epoch_growth: 1, ..Default::default() },
        ramp: RampConfig::default(),
        pretrain: stage.clone(),
        finetune: stage,
        augment: AugmentConfig::default(),
        decoding: DecodeConfig::default(),
        thresholds: vec![3, 15],
        save_epoch_checkpoints: true,
        seed: 11,
    };
    (data, config)
}

fn run_in(dir: &std::path::Path, config: &SelfTrainConfig, data: &slg::toy::ToyData) -> RunSummary {
    let src = build_vocabulary(&data.gold, Side::Text, 1).unwrap();
    let tgt = build_vocabulary(&data.gold, Side::Gloss, 1).unwrap();
    let rules = RuleAnnotator::Embedding(EmbeddingRules::new(&src, &tgt, data.lexicon.clone()).unwrap());
    SelfTrainer::new(config, &data.gold, &data.dev, &data.mono, &rules, src, tgt, dir).unwrap().run().unwrap()
}

#[test]
fn tiny_run_writes_manifests_and_resumes() {
    let (data, config) = tiny_setup();
    let full = tempfile::tempdir().unwrap();
    let summary = run_in(full.path(), &config, &data);
    assert_eq!(summary.manifests.len(), 2);
    let (m1, m2) = (&summary.manifests[0], &summary.manifests[1]);
    assert_eq!((m1.t_k, m2.t_k), (1, 2));
    assert_eq!(m1.synthetic_counts.model, 0);
    assert_eq!(m1.synthetic_counts.rule + m1.synthetic_counts.filtered, 80);
    assert_eq!(m2.synthetic_counts.rule + m2.synthetic_counts.model + m2.synthetic_counts.filtered, 80);
    assert!(m2.best_dev_bleu4 >= m1.best_dev_bleu4);
    assert_eq!(m1.ramp_steps, m2.ramp_steps);
    assert!(full.path().join("best.ckpt").is_file());
    assert!(full.path().join("iter1/epochs/dev_scores.jsonl").is_file());
    let synthetic = slg::rules::read_synthetic(full.path().join(m2.synthetic.as_ref().unwrap())).unwrap();
    assert!(synthetic.iter().all(|p| p.text.tokens()[0] == p.source.tag()));
    assert!(synthetic.iter().all(|p| p.text.tokens()[0] == Vocabulary::TAG_RULE || p.text.tokens()[0] == Vocabulary::TAG_MODEL));

    // Stop after one iteration, then continue with the full schedule.
    let resumed = tempfile::tempdir().unwrap();
    let mut one = config.clone();
    one.schedule.iterations = 1;
    assert_eq!(run_in(resumed.path(), &one, &data).manifests.len(), 1);
    let again = run_in(resumed.path(), &config, &data);
    assert_eq!(again.manifests, summary.manifests);
    let best = |d: &std::path::Path| std::fs::read(d.join("best.ckpt")).unwrap();
    assert_eq!(best(resumed.path()), best(full.path()));
}

#[test]
fn modes_choose_their_synthetic_sources() {
    let (data, mut config) = tiny_setup();
    config.schedule.iterations = 1;
    config.save_epoch_checkpoints = false;
    let src = build_vocabulary(&data.gold, Side::Text, 1).unwrap();
    let tgt = build_vocabulary(&data.gold, Side::Gloss, 1).unwrap();
    let rules = RuleAnnotator::Embedding(EmbeddingRules::new(&src, &tgt, data.lexicon.clone()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let mut model_only = config.clone();
    model_only.schedule.synthetic = SyntheticMode::ModelOnly;
    let t = SelfTrainer::new(&model_only, &data.gold, &data.dev, &data.mono, &rules, src.clone(), tgt.clone(), dir.path()).unwrap();
    assert!(t.synthetic_for(1, None).unwrap().0.is_empty());
    assert!(t.synthetic_for(2, None).is_err());
    let model = common::copy_model();
    let mut rule_only = config.clone();
    rule_only.schedule.synthetic = SyntheticMode::RuleOnly;
    let t = SelfTrainer::new(&rule_only, &data.gold, &data.dev, &data.mono, &rules, src, tgt, dir.path()).unwrap();
    let (d, _) = t.synthetic_for(2, Some(&model)).unwrap();
    assert_eq!(d.rule_fraction(), 1.0);
}
