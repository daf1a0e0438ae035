use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{derive_seed, filter_synthetic, mix_synthetic, model_annotate, tag_all, IterationSchedule, SyntheticDataset, SyntheticMode};
use crate::corpus::{MonolingualCorpus, ParallelCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::inference::{translate_all, DecodeConfig};
use crate::metrics::{evaluate, gloss_counts, EvalReport};
use crate::model::{load_checkpoint, save_checkpoint, Seq2SeqModel, TransformerConfig};
use crate::rules::{annotate_corpus_rule, write_synthetic, RuleAnnotator, Source, SyntheticPair};
use crate::training::{
    steps_per_epoch, train_stage_one, train_stage_two, AugmentConfig, RampConfig, RampSchedule, Session, StageConfig,
    StageTwoOutcome,
};

pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_THRESHOLDS: [usize; 5] = [3, 6, 8, 10, 15];

const SEED_INIT: u64 = 0;
const SEED_MIX: u64 = 1;
const SEED_PRETRAIN: u64 = 2;
const SEED_FINETUNE: u64 = 3;

/// Everything the self-training loop needs besides data and file paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainConfig {
    pub model: TransformerConfig,
    pub schedule: IterationSchedule,
    pub ramp: RampConfig,
    pub pretrain: StageConfig,
    pub finetune: StageConfig,
    pub augment: AugmentConfig,
    pub decoding: DecodeConfig,
    /// Low-frequency thresholds reported in iteration manifests.
    pub thresholds: Vec<usize>,
    /// Save every fine-tuning epoch with its dev score.
    pub save_epoch_checkpoints: bool,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            model: TransformerConfig::default(),
            schedule: IterationSchedule::default(),
            ramp: RampConfig::default(),
            pretrain: StageConfig::default(),
            finetune: StageConfig::default(),
            augment: AugmentConfig::default(),
            decoding: DecodeConfig::default(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            save_epoch_checkpoints: false,
            seed: 0,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        if self.decoding.beam_width == 0 {
            return Err(Error::Config("beam_width must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticCounts {
    pub rule: usize,
    pub model: usize,
    /// Pairs removed by the length and `<UNK>` filters.
    pub filtered: usize,
    /// Model pairs whose decode hit `max_len`.
    pub truncated: usize,
}

/// Record of one finished iteration. Paths are relative to the run
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationManifest {
    pub k: usize,
    pub t_k: usize,
    pub checkpoint: String,
    pub dev: EvalReport,
    pub stage_two: StageTwoOutcome,
    pub best_checkpoint: String,
    pub best_iteration: usize,
    pub best_dev_bleu4: f64,
    pub synthetic: Option<String>,
    pub synthetic_counts: SyntheticCounts,
    pub mix_seed: u64,
    pub ramp_steps: usize,
    pub optimizer_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifests: Vec<IterationManifest>,
    pub best_checkpoint: PathBuf,
    pub best_dev_bleu4: f64,
}

fn iteration_dir(k: usize) -> String {
    format!("iter{k}")
}

/// Drives the iterations of one run inside `out_dir`. Finished iterations
/// leave a manifest behind, and [`SelfTrainer::run`] continues after the
/// last one it finds.
pub struct SelfTrainer<'a> {
    config: &'a SelfTrainConfig,
    gold: &'a ParallelCorpus,
    dev: &'a ParallelCorpus,
    mono: &'a MonolingualCorpus,
    rule_pairs: Vec<SyntheticPair>,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    train_counts: HashMap<String, usize>,
    out_dir: PathBuf,
}

impl<'a> SelfTrainer<'a> {
    /// Annotates `mono` with the rules once; the result is reused by every
    /// iteration.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &'a SelfTrainConfig,
        gold: &'a ParallelCorpus,
        dev: &'a ParallelCorpus,
        mono: &'a MonolingualCorpus,
        rules: &RuleAnnotator,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        out_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        config.validate()?;
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(SelfTrainer {
            config,
            gold,
            dev,
            mono,
            rule_pairs: annotate_corpus_rule(mono, rules),
            src_vocab,
            tgt_vocab,
            train_counts: gloss_counts(gold),
            out_dir,
        })
    }

    pub fn rule_pairs(&self) -> &[SyntheticPair] {
        &self.rule_pairs
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Manifests of the consecutive iterations already finished.
    pub fn completed(&self) -> Result<Vec<IterationManifest>> {
        let mut done = Vec::new();
        for k in 1..=self.config.schedule.iterations {
            let path = self.out_dir.join(iteration_dir(k)).join(MANIFEST_FILE);
            if !path.exists() {
                break;
            }
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            done.push(serde_json::from_str(&text)?);
        }
        Ok(done)
    }

    /// Runs the remaining iterations and returns the overall best checkpoint.
    pub fn run(&self) -> Result<RunSummary> {
        let mut manifests = self.completed()?;
        for k in manifests.len() + 1..=self.config.schedule.iterations {
            let m = self
                .run_iteration(k, manifests.last())
                .map_err(|e| Error::Iteration { k, source: Box::new(e) })?;
            manifests.push(m);
        }
        let last = manifests.last().expect("at least one iteration");
        let best = self.out_dir.join(&last.best_checkpoint);
        fs::copy(&best, self.out_dir.join("best.ckpt")).map_err(|e| Error::io(&best, e))?;
        Ok(RunSummary { best_checkpoint: best, best_dev_bleu4: last.best_dev_bleu4, manifests })
    }

    /// Best model after the iterations finished so far.
    pub fn best_model(&self, last: &IterationManifest) -> Result<Seq2SeqModel> {
        load_checkpoint(self.out_dir.join(&last.best_checkpoint))
    }

    /// Synthetic data for pre-training iteration `k`, plus counts.
    pub fn synthetic_for(&self, k: usize, best: Option<&Seq2SeqModel>) -> Result<(SyntheticDataset, SyntheticCounts)> {
        let mode = self.config.schedule.synthetic;
        let mix_seed = derive_seed(self.config.seed, k, SEED_MIX);
        let model_pairs = match (k, mode) {
            (1, _) | (_, SyntheticMode::RuleOnly) => None,
            _ => {
                let best = best.ok_or_else(|| Error::Config(format!("iteration {k} needs the previous best model")))?;
                Some(model_annotate(best, self.mono, k - 1))
            }
        };
        let mut dataset = match (mode, &model_pairs) {
            (SyntheticMode::ModelOnly, None) => SyntheticDataset { pairs: Vec::new(), iteration: 0, mix_seed },
            (SyntheticMode::ModelOnly, Some(m)) => tag_all(m, k - 1),
            (SyntheticMode::RuleOnly, _) => tag_all(&self.rule_pairs, k - 1),
            (SyntheticMode::Mixed, m) => mix_synthetic(&self.rule_pairs, m.as_deref(), k - 1, mix_seed)?,
        };
        let truncated = dataset.pairs.iter().filter(|p| p.truncated).count();
        let filtered = filter_synthetic(&mut dataset, self.config.model.max_len, self.config.schedule.max_unk_fraction);
        let counts = SyntheticCounts {
            rule: dataset.count(Source::Rule),
            model: dataset.count(Source::Model),
            filtered,
            truncated,
        };
        Ok((dataset, counts))
    }

    /// The consistency ramp shared by all iterations.
    pub fn ramp(&self) -> Result<RampSchedule> {
        let (first, _) = self.synthetic_for(1, None)?;
        let steps = steps_per_epoch(self.gold.len() + first.len(), self.config.pretrain.batch_size)
            * self.config.schedule.pretrain_epochs(1);
        self.config.ramp.schedule(steps)
    }

    pub fn run_iteration(&self, k: usize, previous: Option<&IterationManifest>) -> Result<IterationManifest> {
        let config = self.config;
        let dir = self.out_dir.join(iteration_dir(k));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let best = previous.map(|m| self.best_model(m)).transpose()?;
        let (synthetic, counts) = self.synthetic_for(k, best.as_ref())?;
        drop(best);
        let synthetic_file = (!synthetic.is_empty()).then(|| format!("{}/synthetic.jsonl", iteration_dir(k)));
        if let Some(f) = &synthetic_file {
            write_synthetic(self.out_dir.join(f), &synthetic.pairs)?;
        }

        let ramp = self.ramp()?;
        let log_path = dir.join("train_log.jsonl");
        let log_file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let mut log = BufWriter::new(log_file);
        let mut session = Session::new(k, ramp).with_log(&mut log);

        let mut model = Seq2SeqModel::init(
            config.model.clone(),
            self.src_vocab.clone(),
            self.tgt_vocab.clone(),
            derive_seed(config.seed, k, SEED_INIT),
        )?;
        let t_k = config.schedule.pretrain_epochs(k);
        train_stage_one(
            &mut model,
            self.gold,
            &synthetic.pairs,
            t_k,
            &config.pretrain,
            &config.augment,
            &mut session,
            derive_seed(config.seed, k, SEED_PRETRAIN),
        )?;
        let epoch_dir = dir.join("epochs");
        let stage_two = train_stage_two(
            &mut model,
            self.gold,
            self.dev,
            &config.finetune,
            &config.decoding,
            &mut session,
            derive_seed(config.seed, k, SEED_FINETUNE),
            config.save_epoch_checkpoints.then_some(epoch_dir.as_path()),
        )?;
        let optimizer_steps = session.step;
        drop(session);
        log.flush().map_err(|e| Error::io(&log_path, e))?;

        let checkpoint = format!("{}/model.ckpt", iteration_dir(k));
        save_checkpoint(&model, self.out_dir.join(&checkpoint))?;
        let dev = self.evaluate(&model, self.dev)?;

        let improved = previous.map_or(true, |p| stage_two.best_bleu4 > p.best_dev_bleu4);
        let (best_checkpoint, best_iteration, best_dev_bleu4) = match previous {
            Some(p) if !improved => (p.best_checkpoint.clone(), p.best_iteration, p.best_dev_bleu4),
            _ => (checkpoint.clone(), k, stage_two.best_bleu4),
        };
        let manifest = IterationManifest {
            k,
            t_k,
            checkpoint,
            dev,
            stage_two,
            best_checkpoint,
            best_iteration,
            best_dev_bleu4,
            synthetic: synthetic_file,
            synthetic_counts: counts,
            mix_seed: synthetic.mix_seed,
            ramp_steps: ramp.ramp_steps,
            optimizer_steps,
        };
        // The manifest is written last: its presence marks the iteration done.
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn evaluate(&self, model: &Seq2SeqModel, split: &ParallelCorpus) -> Result<EvalReport> {
        let hyps = translate_all(model, split.texts(), &self.config.decoding);
        let refs: Vec<_> = split.glosses().cloned().collect();
        evaluate(&hyps, &refs, &self.train_counts, &self.config.thresholds)
    }
}

/// Supervised baseline: a fresh model trained on gold data only with the
/// fine-tuning procedure (early stopping on dev BLEU-4) under `stage`.
pub fn train_supervised(
    config: &SelfTrainConfig,
    stage: &StageConfig,
    gold: &ParallelCorpus,
    dev: &ParallelCorpus,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    log: Option<&mut dyn Write>,
) -> Result<(Seq2SeqModel, StageTwoOutcome)> {
    config.validate()?;
    let mut model = Seq2SeqModel::init(config.model.clone(), src_vocab, tgt_vocab, derive_seed(config.seed, 0, SEED_INIT))?;
    let ramp = config
        .ramp
        .schedule(steps_per_epoch(gold.len(), stage.batch_size) * config.schedule.pretrain_epochs(1))?;
    let mut session = Session::new(0, ramp);
    session.log = log;
    let outcome = train_stage_two(
        &mut model,
        gold,
        dev,
        stage,
        &config.decoding,
        &mut session,
        derive_seed(config.seed, 0, SEED_FINETUNE),
        None,
    )?;
    Ok((model, outcome))
}
