//! Synthetic "copy with local reorder" language for tests and demos.
//!
//! Every concept `i` has a text word `w{i}` and a gloss `G{i}`. A sentence
//! is a Zipf-distributed run of concepts with filler words sprinkled in.
//! Its gloss keeps the concepts, drops the fillers and swaps every "verb"
//! concept (`i % 5 == 0`) with the concept that follows it. The lexicon
//! gives glosses their concept vector and words a noisy copy, so the
//! embedding rules are right on most words, blind to the reordering and
//! wrong on every filler.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{GlossSequence, MonolingualCorpus, ParallelCorpus, Sentence};
use crate::error::{Error, Result};
use crate::rules::EmbeddingLexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub concepts: usize,
    pub fillers: usize,
    pub gold: usize,
    pub dev: usize,
    pub mono: usize,
    pub zipf_exponent: f64,
    pub min_concepts: usize,
    pub max_concepts: usize,
    /// Chance of a filler word before each concept.
    pub filler_rate: f64,
    pub lexicon_dim: usize,
    /// Half-width of the uniform noise added to word vectors.
    pub lexicon_noise: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            concepts: 60,
            fillers: 4,
            gold: 500,
            dev: 200,
            mono: 5000,
            zipf_exponent: 1.3,
            min_concepts: 3,
            max_concepts: 7,
            filler_rate: 0.25,
            lexicon_dim: 16,
            lexicon_noise: 0.6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub gold: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub mono: MonolingualCorpus,
    pub lexicon: EmbeddingLexicon,
}

pub fn word(i: usize) -> String {
    format!("w{i:02}")
}

pub fn gloss(i: usize) -> String {
    format!("G{i:02}")
}

pub fn filler(i: usize) -> String {
    format!("f{i}")
}

pub fn is_verb(concept: usize) -> bool {
    concept % 5 == 0
}

/// Gloss order of a concept run: each verb trades places with its
/// successor.
pub fn reorder(concepts: &[usize]) -> Vec<usize> {
    let mut out = concepts.to_vec();
    let mut i = 0;
    while i + 1 < out.len() {
        if is_verb(out[i]) {
            out.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

struct Generator {
    config: ToyConfig,
    rng: ChaCha8Rng,
    concept_dist: WeightedIndex<f64>,
}

impl Generator {
    fn sample(&mut self) -> (Sentence, GlossSequence) {
        let c = &self.config;
        let n = self.rng.gen_range(c.min_concepts..=c.max_concepts);
        let concepts: Vec<usize> = (0..n).map(|_| self.concept_dist.sample(&mut self.rng)).collect();
        let mut text = Vec::new();
        for &k in &concepts {
            if c.fillers > 0 && self.rng.gen_bool(c.filler_rate) {
                text.push(filler(self.rng.gen_range(0..c.fillers)));
            }
            text.push(word(k));
        }
        let glosses = reorder(&concepts).into_iter().map(gloss).collect();
        (Sentence::new(text).expect("at least one concept"), GlossSequence::new(glosses))
    }
}

pub fn generate(config: &ToyConfig) -> Result<ToyData> {
    if config.concepts == 0 || config.min_concepts == 0 || config.min_concepts > config.max_concepts {
        return Err(Error::Config("toy language needs concepts and a valid length range".into()));
    }
    let weights: Vec<f64> = (0..config.concepts).map(|i| 1.0 / ((i + 1) as f64).powf(config.zipf_exponent)).collect();
    let mut g = Generator {
        config: config.clone(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        concept_dist: WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?,
    };

    let gold: Vec<_> = (0..config.gold).map(|_| g.sample()).collect();
    let seen: HashSet<Sentence> = gold.iter().map(|(x, _)| x.clone()).collect();
    let mut dev = Vec::with_capacity(config.dev);
    while dev.len() < config.dev {
        let pair = g.sample();
        if !seen.contains(&pair.0) {
            dev.push(pair);
        }
    }
    let mono = (0..config.mono).map(|_| g.sample().0).collect();

    let dim = config.lexicon_dim;
    let mut lexicon = EmbeddingLexicon::new(dim);
    let unit = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect() };
    for i in 0..config.concepts {
        let concept = unit(&mut g.rng, 1.0);
        let noise = unit(&mut g.rng, config.lexicon_noise);
        lexicon.insert(word(i), concept.iter().zip(&noise).map(|(a, b)| a + b).collect())?;
        lexicon.insert(gloss(i), concept)?;
    }
    for i in 0..config.fillers {
        lexicon.insert(filler(i), unit(&mut g.rng, 1.0))?;
    }

    Ok(ToyData {
        gold: ParallelCorpus::new(gold)?,
        dev: ParallelCorpus::new(dev)?,
        mono: MonolingualCorpus::new(mono),
        lexicon,
    })
}

/// File locations written by [`ToyData::write`].
#[derive(Debug, Clone)]
pub struct ToyFiles {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub mono: PathBuf,
    pub lexicon: PathBuf,
}

impl ToyData {
    /// Writes `train.tsv`, `dev.tsv`, `mono.txt` and `lexicon.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<ToyFiles> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = ToyFiles {
            train: dir.join("train.tsv"),
            dev: dir.join("dev.tsv"),
            mono: dir.join("mono.txt"),
            lexicon: dir.join("lexicon.txt"),
        };
        let tsv = |c: &ParallelCorpus| c.pairs().iter().map(|(x, y)| format!("{x}\t{y}\n")).collect::<String>();
        let write = |path: &Path, content: String| fs::write(path, content).map_err(|e| Error::io(path, e));
        write(&files.train, tsv(&self.gold))?;
        write(&files.dev, tsv(&self.dev))?;
        write(&files.mono, self.mono.sentences().iter().map(|s| format!("{s}\n")).collect())?;
        self.lexicon.write(&files.lexicon)?;
        Ok(files)
    }
}
