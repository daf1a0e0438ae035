//! TOML run configuration shared by the command-line tools.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_vocabulary, load_monolingual_corpus, load_parallel_corpus, CorpusFormat, MonolingualCorpus, ParallelCorpus,
    Side, Tokenizer, Vocabulary,
};
use crate::error::{Error, Result};
use crate::inference::DecodeConfig;
use crate::model::TransformerConfig;
use crate::rules::{EmbeddingLexicon, EmbeddingRules, Language, LemmaRules, LemmaTable, RuleAnnotator};
use crate::selftrain::{IterationSchedule, SelfTrainConfig};
use crate::training::{AugmentConfig, RampConfig, StageConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub train: PathBuf,
    pub dev: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mono: Option<PathBuf>,
    /// Word and gloss embeddings for the embedding rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// `surface<TAB>lemma` table for the lemma rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabConfig {
    pub min_count: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { min_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub thresholds: Vec<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { thresholds: SelfTrainConfig::default().thresholds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default = "default_language")]
    pub language: Language,
    #[serde(default)]
    pub tokenizer: Tokenizer,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub save_epoch_checkpoints: bool,
    #[serde(default)]
    pub vocab: VocabConfig,
    #[serde(default)]
    pub model: TransformerConfig,
    #[serde(default)]
    pub schedule: IterationSchedule,
    #[serde(default)]
    pub ramp: RampConfig,
    #[serde(default)]
    pub pretrain: StageConfig,
    #[serde(default)]
    pub finetune: StageConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub decoding: DecodeConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_language() -> Language {
    Language::Zh
}

pub const SRC_VOCAB_FILE: &str = "vocab.text.txt";
pub const TGT_VOCAB_FILE: &str = "vocab.gloss.txt";

impl RunConfig {
    /// Config with every setting at its default.
    pub fn with_paths(paths: Paths) -> Self {
        RunConfig {
            paths,
            language: default_language(),
            tokenizer: Tokenizer::default(),
            seed: 0,
            save_epoch_checkpoints: false,
            vocab: VocabConfig::default(),
            model: TransformerConfig::default(),
            schedule: IterationSchedule::default(),
            ramp: RampConfig::default(),
            pretrain: StageConfig::default(),
            finetune: StageConfig::default(),
            augment: AugmentConfig::default(),
            decoding: DecodeConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file, resolves relative paths against its directory
    /// and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        fix(&mut p.train);
        fix(&mut p.dev);
        fix(&mut p.output);
        for opt in [&mut p.test, &mut p.mono, &mut p.lexicon, &mut p.lemmas] {
            if let Some(q) = opt {
                fix(q);
            }
        }
    }

    /// Checks the settings and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let inputs = [Some(&p.train), Some(&p.dev), p.test.as_ref(), p.mono.as_ref(), p.lexicon.as_ref(), p.lemmas.as_ref()];
        for path in inputs.into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        if self.vocab.min_count == 0 {
            return Err(Error::Config("vocab.min_count must be at least 1".into()));
        }
        self.selftrain().validate()
    }

    pub fn selftrain(&self) -> SelfTrainConfig {
        SelfTrainConfig {
            model: self.model.clone(),
            schedule: self.schedule.clone(),
            ramp: self.ramp.clone(),
            pretrain: self.pretrain.clone(),
            finetune: self.finetune.clone(),
            augment: self.augment.clone(),
            decoding: self.decoding.clone(),
            thresholds: self.evaluation.thresholds.clone(),
            save_epoch_checkpoints: self.save_epoch_checkpoints,
            seed: self.seed,
        }
    }

    pub fn load_parallel(&self, path: &Path) -> Result<ParallelCorpus> {
        load_parallel_corpus(path, CorpusFormat::from_path(path), self.tokenizer)
    }

    pub fn train(&self) -> Result<ParallelCorpus> {
        self.load_parallel(&self.paths.train)
    }

    pub fn dev(&self) -> Result<ParallelCorpus> {
        self.load_parallel(&self.paths.dev)
    }

    pub fn mono(&self) -> Result<MonolingualCorpus> {
        let path = self.paths.mono.as_ref().ok_or_else(|| Error::Config("paths.mono is not set".into()))?;
        load_monolingual_corpus(path, self.tokenizer)
    }

    /// Source and target vocabularies built from the training split.
    pub fn build_vocabularies(&self, train: &ParallelCorpus) -> Result<(Vocabulary, Vocabulary)> {
        Ok((
            build_vocabulary(train, Side::Text, self.vocab.min_count)?,
            build_vocabulary(train, Side::Gloss, self.vocab.min_count)?,
        ))
    }

    /// Vocabularies saved in the output directory, or built fresh.
    pub fn vocabularies(&self, train: &ParallelCorpus) -> Result<(Vocabulary, Vocabulary)> {
        let (s, t) = (self.paths.output.join(SRC_VOCAB_FILE), self.paths.output.join(TGT_VOCAB_FILE));
        if s.is_file() && t.is_file() {
            Ok((Vocabulary::read(&s)?, Vocabulary::read(&t)?))
        } else {
            self.build_vocabularies(train)
        }
    }

    pub fn rule_annotator(&self, words: &Vocabulary, glosses: &Vocabulary) -> Result<RuleAnnotator> {
        match self.language {
            Language::Zh => {
                let path = self.paths.lexicon.as_ref().ok_or_else(|| Error::Config("paths.lexicon is required for zh".into()))?;
                Ok(RuleAnnotator::Embedding(EmbeddingRules::new(words, glosses, EmbeddingLexicon::load(path)?)?))
            }
            Language::De => {
                let path = self.paths.lemmas.as_ref().ok_or_else(|| Error::Config("paths.lemmas is required for de".into()))?;
                Ok(RuleAnnotator::Lemma(LemmaRules::new(words, glosses, LemmaTable::load(path)?)))
            }
        }
    }
}
