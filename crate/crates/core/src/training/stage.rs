use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment, tag_prefix_len, AugmentConfig};
use super::loss::{example_loss, LossBreakdown, PassSeeds};
use super::{Adam, RampSchedule};
use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::inference::{translate_all, DecodeConfig};
use crate::metrics::bleu_n;
use crate::model::{save_checkpoint, Seq2SeqModel};
use crate::rules::SyntheticPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Stage {
    Pretrain,
    Finetune,
}

/// Optimizer settings of one training stage. Pre-training runs a fixed
/// number of epochs chosen by the iteration schedule; fine-tuning stops
/// after `patience` dev evaluations without improvement, or at
/// `max_epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    /// Whether the consistency term is part of the loss.
    pub consistency: bool,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig { learning_rate: 5e-5, batch_size: 32, patience: 5, max_epochs: 100, consistency: true }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the JSONL training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub stage: Stage,
    pub step: usize,
    pub ce: f64,
    pub cr: f64,
    pub w_effective: f64,
    pub total: f64,
}

/// State shared by both stages of one iteration: the consistency ramp, the
/// optimizer step counter it is indexed by, and an optional step log.
pub struct Session<'a> {
    pub iteration: usize,
    pub ramp: RampSchedule,
    pub step: usize,
    pub log: Option<&'a mut dyn Write>,
}

impl<'a> Session<'a> {
    pub fn new(iteration: usize, ramp: RampSchedule) -> Self {
        Session { iteration, ramp, step: 0, log: None }
    }

    pub fn with_log(mut self, log: &'a mut dyn Write) -> Self {
        self.log = Some(log);
        self
    }
}

/// An encoded training pair. Only synthetic examples are augmented.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub synthetic: bool,
}

pub fn encode_gold(model: &Seq2SeqModel, gold: &ParallelCorpus) -> Result<Vec<Example>> {
    gold.pairs()
        .iter()
        .map(|(x, y)| {
            let (src, tgt) = model.encode_pair(x, y)?;
            Ok(Example { src, tgt, synthetic: false })
        })
        .collect()
}

pub fn encode_synthetic(model: &Seq2SeqModel, pairs: &[SyntheticPair]) -> Result<Vec<Example>> {
    pairs
        .iter()
        .map(|p| {
            let (src, tgt) = model.encode_pair(&p.text, &p.gloss)?;
            Ok(Example { src, tgt, synthetic: true })
        })
        .collect()
}

/// One pass over `examples` in a seeded random order.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    model: &mut Seq2SeqModel,
    examples: &[Example],
    config: &StageConfig,
    augment_config: &AugmentConfig,
    adam: &mut Adam,
    session: &mut Session,
    stage: Stage,
    rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let mut grads = model.net.params().zero_grads();
    let mut sum = LossBreakdown { ce: 0.0, cr: 0.0, total: 0.0, w_effective: 0.0 };
    for batch in order.chunks(config.batch_size) {
        grads.fill_zero();
        let w = if config.consistency { session.ramp.weight(session.step) } else { 0.0 };
        let scale = 1.0 / batch.len() as f64;
        let mut mean = LossBreakdown { ce: 0.0, cr: 0.0, total: 0.0, w_effective: w };
        for &i in batch {
            let ex = &examples[i];
            let src = if ex.synthetic && augment_config.enabled {
                augment(&ex.src, tag_prefix_len(&ex.src), rng, augment_config.p_drop, augment_config.window)
            } else {
                ex.src.clone()
            };
            let seeds = PassSeeds(rng.gen(), rng.gen());
            let l = example_loss(&model.net, &src, &ex.tgt, w, config.consistency, seeds, Some((&mut grads, scale)));
            mean.ce += l.ce * scale;
            mean.cr += l.cr * scale;
            mean.total += l.total * scale;
        }
        adam.step(model.net.params_mut(), &grads);
        if let Some(log) = session.log.as_mut() {
            let record = StepRecord {
                iteration: session.iteration,
                stage,
                step: session.step,
                ce: mean.ce,
                cr: mean.cr,
                w_effective: mean.w_effective,
                total: mean.total,
            };
            serde_json::to_writer(&mut **log, &record)?;
            writeln!(log).map_err(|e| Error::io("training log", e))?;
        }
        session.step += 1;
        let n = batch.len() as f64 / examples.len() as f64;
        sum.ce += mean.ce * n;
        sum.cr += mean.cr * n;
        sum.total += mean.total * n;
        sum.w_effective = w;
    }
    Ok(sum)
}

/// Optimizer steps per epoch over `n` examples.
pub fn steps_per_epoch(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size.max(1))
}

/// Pre-training on gold plus (already tagged) synthetic pairs for exactly
/// `epochs` epochs.
#[allow(clippy::too_many_arguments)]
pub fn train_stage_one(
    model: &mut Seq2SeqModel,
    gold: &ParallelCorpus,
    synthetic: &[SyntheticPair],
    epochs: usize,
    config: &StageConfig,
    augment_config: &AugmentConfig,
    session: &mut Session,
    seed: u64,
) -> Result<()> {
    config.validate()?;
    let mut examples = encode_gold(model, gold)?;
    examples.extend(encode_synthetic(model, synthetic)?);
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut adam = Adam::new(model.net.params(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        train_epoch(model, &examples, config, augment_config, &mut adam, session, Stage::Pretrain, &mut rng)?;
    }
    Ok(())
}

pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best score and signals a stop after `patience` consecutive
/// evaluations without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: None, stale: 0 }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> Verdict {
        match self.best {
            Some((_, best)) if score <= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Verdict::Stop
                } else {
                    Verdict::Continue
                }
            }
            _ => {
                self.best = Some((epoch, score));
                self.stale = 0;
                Verdict::Improved
            }
        }
    }

    /// `(epoch, score)` of the best evaluation so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoOutcome {
    pub best_bleu4: f64,
    /// Epoch of the returned parameters; 0 means fine-tuning never improved
    /// on the starting point.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Dev BLEU-4 after each epoch, starting with the untouched model.
    pub dev_bleu4: Vec<f64>,
}

/// Dev BLEU-4 of `model` under `decode`.
pub fn dev_bleu4(model: &Seq2SeqModel, dev: &ParallelCorpus, decode: &DecodeConfig) -> Result<f64> {
    let hyps = translate_all(model, dev.texts(), decode);
    let refs: Vec<_> = dev.glosses().cloned().collect();
    bleu_n(&hyps, &refs, 4)
}

#[derive(Serialize)]
struct DevScoreLine<'a> {
    epoch: usize,
    bleu4: f64,
    checkpoint: &'a str,
}

/// Fine-tuning on gold data with dev BLEU-4 early stopping. The model is
/// left holding the best parameters seen, including the starting ones.
/// With `checkpoint_dir`, every epoch is saved there and its score appended
/// to `dev_scores.jsonl`.
#[allow(clippy::too_many_arguments)]
pub fn train_stage_two(
    model: &mut Seq2SeqModel,
    gold: &ParallelCorpus,
    dev: &ParallelCorpus,
    config: &StageConfig,
    decode: &DecodeConfig,
    session: &mut Session,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<StageTwoOutcome> {
    config.validate()?;
    let examples = encode_gold(model, gold)?;
    let mut adam = Adam::new(model.net.params(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best_params = model.net.params().clone();
    let mut scores = Vec::new();
    let mut epochs_run = 0;
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for epoch in 0..=config.max_epochs {
        if epoch > 0 {
            train_epoch(model, &examples, config, &AugmentConfig::default(), &mut adam, session, Stage::Finetune, &mut rng)?;
            epochs_run = epoch;
        }
        let score = dev_bleu4(model, dev, decode)?;
        scores.push(score);
        if let Some(dir) = checkpoint_dir {
            record_epoch(model, dir, epoch, score)?;
        }
        match stopper.observe(epoch, score) {
            Verdict::Improved => best_params = model.net.params().clone(),
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    *model.net.params_mut() = best_params;
    let (best_epoch, best_bleu4) = stopper.best().expect("at least one evaluation");
    Ok(StageTwoOutcome { best_bleu4, best_epoch, epochs_run, dev_bleu4: scores })
}

fn record_epoch(model: &Seq2SeqModel, dir: &Path, epoch: usize, bleu4: f64) -> Result<()> {
    let name = format!("epoch{epoch:03}.ckpt");
    save_checkpoint(model, dir.join(&name))?;
    let path: PathBuf = dir.join("dev_scores.jsonl");
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
    let line = serde_json::to_string(&DevScoreLine { epoch, bleu4, checkpoint: &name })?;
    writeln!(f, "{line}").map_err(|e| Error::io(&path, e))
}
