use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GlossSequence, MonolingualCorpus, ParallelCorpus, Sentence, Tokenizer};
use crate::error::{Error, Result};

/// On-disk layout of a parallel corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// `text<TAB>gloss`, one pair per line.
    Tsv,
    /// `{"text": ..., "gloss": ...}`, one object per line.
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    gloss: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_parallel_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    tokenizer: Tokenizer,
) -> Result<ParallelCorpus> {
    let path = path.as_ref();
    parse_parallel(&read(path)?, format, tokenizer, path)
}

/// Parses parallel records from `content`; `origin` only labels errors.
pub fn parse_parallel(
    content: &str,
    format: CorpusFormat,
    tokenizer: Tokenizer,
    origin: &Path,
) -> Result<ParallelCorpus> {
    let malformed = |line: usize, message: String| Error::Malformed {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut pairs = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (text, gloss) = match format {
            CorpusFormat::Tsv => {
                let mut fields = raw.split('\t');
                let text = fields.next().unwrap_or_default();
                let gloss = fields
                    .next()
                    .ok_or_else(|| malformed(line_no, "missing gloss column".into()))?;
                if fields.next().is_some() {
                    return Err(malformed(line_no, "expected exactly two tab-separated columns".into()));
                }
                (text.to_owned(), gloss.to_owned())
            }
            CorpusFormat::Jsonl => {
                let rec: JsonRecord = serde_json::from_str(raw)
                    .map_err(|e| malformed(line_no, e.to_string()))?;
                (rec.text, rec.gloss)
            }
        };
        let text = Sentence::parse(&text, tokenizer)
            .map_err(|_| malformed(line_no, "empty text field".into()))?;
        pairs.push((text, GlossSequence::parse(&gloss, tokenizer)));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    ParallelCorpus::new(pairs)
}

pub fn load_monolingual_corpus(path: impl AsRef<Path>, tokenizer: Tokenizer) -> Result<MonolingualCorpus> {
    let path = path.as_ref();
    Ok(parse_monolingual(&read(path)?, tokenizer))
}

/// One sentence per line; blank lines are skipped.
pub fn parse_monolingual(content: &str, tokenizer: Tokenizer) -> MonolingualCorpus {
    MonolingualCorpus::new(
        content
            .lines()
            .filter_map(|l| Sentence::parse(l, tokenizer).ok())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tsv(content: &str) -> Result<ParallelCorpus> {
        parse_parallel(content, CorpusFormat::Tsv, Tokenizer::Whitespace, Path::new("t.tsv"))
    }

    #[test]
    fn parses_two_line_tsv() {
        let c = tsv("ich liebe\tICH LIEBEN\nes regnet\tREGEN\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs()[0].1.tokens(), &["ICH", "LIEBEN"]);
        assert_eq!(c.pairs()[1].0.tokens(), &["es", "regnet"]);
    }

    #[test]
    fn missing_gloss_column_names_line() {
        let err = tsv("a\tA\nb c\n").unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(tsv(""), Err(Error::EmptyFile(_))));
        assert!(matches!(tsv("\n  \n"), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn jsonl_records_and_errors() {
        let origin = Path::new("c.jsonl");
        let ok = "{\"text\": \"a b\", \"gloss\": \"X\"}\n{\"text\": \"c\", \"gloss\": \"\"}\n";
        let c = parse_parallel(ok, CorpusFormat::Jsonl, Tokenizer::Whitespace, origin).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.pairs()[1].1.is_empty());
        let bad = "{\"text\": \"a b\", \"gloss\": \"X\"}\n{\"text\": \"c\"}\n";
        let err = parse_parallel(bad, CorpusFormat::Jsonl, Tokenizer::Whitespace, origin).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn loads_from_disk_in_file_order() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x y\tX Y").unwrap();
        writeln!(f, "z\tZ").unwrap();
        let c = load_parallel_corpus(f.path(), CorpusFormat::Tsv, Tokenizer::Whitespace).unwrap();
        let again = load_parallel_corpus(f.path(), CorpusFormat::Tsv, Tokenizer::Whitespace).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.pairs()[1].0.tokens(), &["z"]);
        assert!(load_parallel_corpus("/nonexistent/x.tsv", CorpusFormat::Tsv, Tokenizer::Whitespace).is_err());
    }

    #[test]
    fn monolingual_skips_blank_lines() {
        let m = parse_monolingual("a b\n\nc\n", Tokenizer::Whitespace);
        assert_eq!(m.len(), 2);
    }
}
