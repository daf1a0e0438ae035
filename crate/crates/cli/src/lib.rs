//! Command-line driver: every subcommand reads a TOML [`RunConfig`] and
//! writes its artifacts under `paths.output`.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use slg::config::{Paths, RunConfig, SRC_VOCAB_FILE, TGT_VOCAB_FILE};
use slg::corpus::{corpus_stats, load_parallel_corpus, CorpusFormat, GlossSequence, Sentence, Tokenizer};
use slg::inference::{translate, translate_all, DecodeConfig};
use slg::metrics::{evaluate, gloss_counts};
use slg::model::{load_checkpoint, save_checkpoint};
use slg::rules::{annotate_corpus_rule, write_synthetic};
use slg::selftrain::{model_annotate, train_supervised, SelfTrainer};
use slg::toy::{generate, ToyConfig};

#[derive(Debug, Parser)]
#[command(name = "slg", version, about = "Semi-supervised text-to-gloss translation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build source and gloss vocabularies from the training split.
    BuildVocab {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pseudo-gloss the monolingual corpus into a JSONL file.
    Annotate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: AnnotateMode,
        /// Required for `--mode model`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Sentence-per-line input; defaults to `paths.mono`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Iteration number recorded on each pair.
        #[arg(long, default_value_t = 0)]
        iteration: usize,
    },
    /// Supervised training on gold data only, with early stopping on dev.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `<output>/supervised.ckpt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-training iterations, resuming completed ones.
    Iterate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print an evaluation report as JSON.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Decode the split with this checkpoint.
        #[arg(long, conflicts_with = "hyp")]
        checkpoint: Option<PathBuf>,
        /// Gloss-per-line hypotheses to score instead of decoding.
        #[arg(long, requires = "reference")]
        hyp: Option<PathBuf>,
        /// Gloss-per-line references for `--hyp`.
        #[arg(long = "ref", id = "reference")]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Dev)]
        split: Split,
    },
    /// Print corpus statistics as JSON, measured against the training vocabularies.
    Stats {
        #[arg(long)]
        config: PathBuf,
    },
    /// Translate sentence-per-line input to gloss-per-line output.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to stdin.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DecodeConfig::default().beam_width)]
        beam_width: usize,
        #[arg(long, default_value_t = DecodeConfig::default().length_penalty)]
        length_penalty: f64,
    },
    /// Write the synthetic toy corpora and a matching `run.toml`.
    MakeToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = ToyConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = ToyConfig::default().mono)]
        mono: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnnotateMode {
    Rule,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// Wrong or missing arguments that clap cannot express.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Machine-readable category for an error chain.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<UsageError>().is_some() {
        "usage"
    } else if let Some(e) = err.downcast_ref::<slg::error::Error>() {
        e.kind()
    } else if err.downcast_ref::<io::Error>().is_some() {
        "io"
    } else {
        "other"
    }
}

/// Runs one command. A returned value is printed to stdout as JSON.
pub fn run(command: Command) -> Result<Option<Value>> {
    match command {
        Command::BuildVocab { config } => build_vocab(&RunConfig::load(config)?).map(Some),
        Command::Annotate { config, mode, checkpoint, input, out, iteration } => {
            let config = RunConfig::load(config)?;
            annotate(&config, mode, checkpoint.as_deref(), input.as_deref(), &out, iteration).map(Some)
        }
        Command::Train { config, out } => train(&RunConfig::load(config)?, out).map(Some),
        Command::Iterate { config } => iterate(&RunConfig::load(config)?).map(Some),
        Command::Evaluate { config, checkpoint, hyp, reference, split } => {
            let config = RunConfig::load(config)?;
            let report = match (checkpoint, hyp, reference) {
                (Some(ckpt), None, _) => evaluate_checkpoint(&config, &ckpt, split)?,
                (None, Some(h), Some(r)) => evaluate_files(&config, &h, &r)?,
                _ => bail!(UsageError("evaluate needs --checkpoint or --hyp with --ref".into())),
            };
            Ok(Some(report))
        }
        Command::Stats { config } => stats(&RunConfig::load(config)?).map(Some),
        Command::Translate { checkpoint, input, out, beam_width, length_penalty } => {
            let decode = DecodeConfig { beam_width, length_penalty };
            translate_file(&checkpoint, input.as_deref(), out.as_deref(), &decode)?;
            Ok(None)
        }
        Command::MakeToy { out, seed, mono } => make_toy(&out, seed, mono).map(Some),
    }
}

fn create_output(config: &RunConfig) -> Result<()> {
    let out = &config.paths.output;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn build_vocab(config: &RunConfig) -> Result<Value> {
    let train = config.train()?;
    let (src, tgt) = config.build_vocabularies(&train)?;
    create_output(config)?;
    let (s, t) = (config.paths.output.join(SRC_VOCAB_FILE), config.paths.output.join(TGT_VOCAB_FILE));
    src.write(&s)?;
    tgt.write(&t)?;
    Ok(json!({
        "text": { "path": s, "size": src.len() },
        "gloss": { "path": t, "size": tgt.len() },
    }))
}

fn annotate(
    config: &RunConfig,
    mode: AnnotateMode,
    checkpoint: Option<&Path>,
    input: Option<&Path>,
    out: &Path,
    iteration: usize,
) -> Result<Value> {
    let mono = match input {
        Some(path) => slg::corpus::load_monolingual_corpus(path, config.tokenizer)?,
        None => config.mono()?,
    };
    let mut pairs = match mode {
        AnnotateMode::Rule => {
            let (src, tgt) = config.vocabularies(&config.train()?)?;
            annotate_corpus_rule(&mono, &config.rule_annotator(&src, &tgt)?)
        }
        AnnotateMode::Model => {
            let Some(ckpt) = checkpoint else {
                bail!(UsageError("--mode model requires --checkpoint".into()));
            };
            model_annotate(&load_checkpoint(ckpt)?, &mono, iteration)
        }
    };
    for p in &mut pairs {
        p.iteration = iteration;
    }
    write_synthetic(out, &pairs)?;
    let truncated = pairs.iter().filter(|p| p.truncated).count();
    Ok(json!({ "path": out, "pairs": pairs.len(), "truncated": truncated }))
}

fn train(config: &RunConfig, out: Option<PathBuf>) -> Result<Value> {
    let (gold, dev) = (config.train()?, config.dev()?);
    let (src, tgt) = config.vocabularies(&gold)?;
    create_output(config)?;
    let log_path = config.paths.output.join("supervised_log.jsonl");
    let mut log = io::BufWriter::new(fs::File::create(&log_path).with_context(|| log_path.display().to_string())?);
    let selftrain = config.selftrain();
    let (model, outcome) = train_supervised(&selftrain, &config.finetune, &gold, &dev, src, tgt, Some(&mut log))?;
    log.flush()?;
    let path = out.unwrap_or_else(|| config.paths.output.join("supervised.ckpt"));
    save_checkpoint(&model, &path)?;
    Ok(json!({ "checkpoint": path, "outcome": outcome }))
}

fn iterate(config: &RunConfig) -> Result<Value> {
    let (gold, dev, mono) = (config.train()?, config.dev()?, config.mono()?);
    let (src, tgt) = config.vocabularies(&gold)?;
    let rules = config.rule_annotator(&src, &tgt)?;
    let selftrain = config.selftrain();
    let trainer = SelfTrainer::new(&selftrain, &gold, &dev, &mono, &rules, src, tgt, &config.paths.output)?;
    let summary = trainer.run()?;
    let iterations: Vec<Value> = summary
        .manifests
        .iter()
        .map(|m| json!({ "k": m.k, "t_k": m.t_k, "dev_bleu4": m.dev.bleu4(), "best_dev_bleu4": m.best_dev_bleu4 }))
        .collect();
    Ok(json!({ "best_checkpoint": summary.best_checkpoint, "iterations": iterations }))
}

fn split_path(config: &RunConfig, split: Split) -> Result<&Path> {
    Ok(match split {
        Split::Train => &config.paths.train,
        Split::Dev => &config.paths.dev,
        Split::Test => config.paths.test.as_deref().ok_or_else(|| UsageError("paths.test is not set".into()))?,
    })
}

fn evaluate_checkpoint(config: &RunConfig, checkpoint: &Path, split: Split) -> Result<Value> {
    let path = split_path(config, split)?;
    let model = load_checkpoint(checkpoint)?;
    let data = config.load_parallel(path)?;
    let hyps = translate_all(&model, data.texts(), &config.decoding);
    let refs: Vec<GlossSequence> = data.glosses().cloned().collect();
    let report = evaluate(&hyps, &refs, &gloss_counts(&config.train()?), &config.evaluation.thresholds)?;
    Ok(serde_json::to_value(report)?)
}

fn read_glosses(path: &Path, tokenizer: Tokenizer) -> Result<Vec<GlossSequence>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    Ok(text.lines().map(|l| GlossSequence::parse(l, tokenizer)).collect())
}

fn evaluate_files(config: &RunConfig, hyp: &Path, reference: &Path) -> Result<Value> {
    let hyps = read_glosses(hyp, config.tokenizer)?;
    let refs = read_glosses(reference, config.tokenizer)?;
    let report = evaluate(&hyps, &refs, &gloss_counts(&config.train()?), &config.evaluation.thresholds)?;
    Ok(serde_json::to_value(report)?)
}

fn stats(config: &RunConfig) -> Result<Value> {
    let train = config.train()?;
    let (src, tgt) = config.vocabularies(&train)?;
    let mut out = serde_json::Map::new();
    out.insert("train".into(), serde_json::to_value(corpus_stats(&train, &src, Some(&tgt)))?);
    out.insert("dev".into(), serde_json::to_value(corpus_stats(&config.dev()?, &src, Some(&tgt)))?);
    if let Some(test) = &config.paths.test {
        let data = load_parallel_corpus(test, CorpusFormat::from_path(test), config.tokenizer)?;
        out.insert("test".into(), serde_json::to_value(corpus_stats(&data, &src, Some(&tgt)))?);
    }
    if config.paths.mono.is_some() {
        out.insert("mono".into(), serde_json::to_value(corpus_stats(&config.mono()?, &src, None))?);
    }
    Ok(Value::Object(out))
}

fn translate_file(checkpoint: &Path, input: Option<&Path>, out: Option<&Path>, decode: &DecodeConfig) -> Result<()> {
    if decode.beam_width == 0 {
        bail!(UsageError("--beam-width must be at least 1".into()));
    }
    let model = load_checkpoint(checkpoint)?;
    let reader: Box<dyn BufRead> = match input {
        Some(p) => Box::new(io::BufReader::new(fs::File::open(p).with_context(|| p.display().to_string())?)),
        None => Box::new(io::stdin().lock()),
    };
    let mut writer: Box<dyn Write> = match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| p.display().to_string())?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    };
    for line in reader.lines() {
        let line = line?;
        // Blank input lines stay blank so output lines align with input lines.
        let gloss = match Sentence::parse(&line, Tokenizer::default()) {
            Ok(x) => translate(&model, &x, decode).0.to_string(),
            Err(_) => String::new(),
        };
        writeln!(writer, "{gloss}")?;
    }
    writer.flush()?;
    Ok(())
}

fn make_toy(out: &Path, seed: u64, mono: usize) -> Result<Value> {
    let data = generate(&ToyConfig { seed, mono, ..Default::default() })?;
    let files = data.write(out)?;
    let name = |p: &Path| PathBuf::from(p.file_name().expect("toy files have names"));
    let mut config = RunConfig::with_paths(Paths {
        train: name(&files.train),
        dev: name(&files.dev),
        test: None,
        mono: Some(name(&files.mono)),
        lexicon: Some(name(&files.lexicon)),
        lemmas: None,
        output: PathBuf::from("run"),
    });
    config.seed = seed;
    let path = out.join("run.toml");
    fs::write(&path, config.to_toml()?).with_context(|| path.display().to_string())?;
    Ok(json!({ "config": path, "gold": data.gold.len(), "dev": data.dev.len(), "mono": data.mono.len() }))
}
