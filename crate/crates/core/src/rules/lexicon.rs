use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Word embeddings keyed by token, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingLexicon {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

/// A token had no vector in the lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMiss(pub String);

impl EmbeddingLexicon {
    pub fn new(dim: usize) -> Self {
        EmbeddingLexicon {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.entries.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// L2-normalized copy of a token's vector. Zero vectors stay zero.
    pub fn normalized(&self, token: &str) -> std::result::Result<Vec<f64>, LexiconMiss> {
        self.get(token)
            .map(normalize)
            .ok_or_else(|| LexiconMiss(token.to_owned()))
    }

    /// Reads `token v1 … vd` lines. A leading `count dim` header line (word2vec
    /// text format) is accepted and skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path)
    }

    pub fn parse(content: &str, origin: &Path) -> Result<Self> {
        let mut lexicon: Option<EmbeddingLexicon> = None;
        for (idx, raw) in content.lines().enumerate() {
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let malformed = |message: String| Error::Malformed {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            if fields.len() < 2 {
                return Err(malformed("expected a token followed by its vector".into()));
            }
            let vector = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| malformed(e.to_string()))?;
            let lex = lexicon.get_or_insert_with(|| EmbeddingLexicon::new(vector.len()));
            lex.insert(fields[0], vector)
                .map_err(|e| malformed(e.to_string()))?;
        }
        lexicon.ok_or_else(|| Error::EmptyFile(origin.to_path_buf()))
    }

    /// Writes the lexicon in the format accepted by [`EmbeddingLexicon::load`],
    /// tokens sorted for reproducible output.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(k);
            for v in &self.entries[k] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| x / norm).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of a spoken word and a gloss: the dot product of their
/// L2-normalized embeddings.
pub fn similarity(word: &str, gloss: &str, lexicon: &EmbeddingLexicon) -> std::result::Result<f64, LexiconMiss> {
    let w = lexicon.normalized(word)?;
    let g = lexicon.normalized(gloss)?;
    Ok(dot(&w, &g))
}
