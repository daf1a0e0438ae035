use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Surface form → lemma. Unknown forms are their own lemma.
///
/// Chains (`a → b`, `b → c`) are resolved on construction so that
/// lemmatizing a lemma is a no-op.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaTable {
    entries: HashMap<String, String>,
}

impl LemmaTable {
    pub fn new<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut raw = HashMap::new();
        for (surface, lemma) in pairs {
            let (surface, lemma) = (surface.into(), lemma.into());
            if lemma.is_empty() {
                return Err(Error::Config(format!("empty lemma for {surface:?}")));
            }
            raw.insert(surface, lemma);
        }
        let entries = raw
            .keys()
            .map(|surface| (surface.clone(), resolve(&raw, surface)))
            .collect();
        Ok(LemmaTable { entries })
    }

    /// Reads `surface<TAB>lemma` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| Error::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected surface<TAB>lemma".into(),
            })?;
            if surface.trim().is_empty() || lemma.trim().is_empty() {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: "empty surface form or lemma".into(),
                });
            }
            pairs.push((surface.trim().to_owned(), lemma.trim().to_owned()));
        }
        Self::new(pairs)
    }

    pub fn lemmatize<'a>(&'a self, word: &'a str) -> &'a str {
        self.entries.get(word).map(String::as_str).unwrap_or(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Follows `surface → lemma` links to a fixpoint. A chain that runs into a
/// cycle resolves to the cycle's smallest member.
fn resolve(raw: &HashMap<String, String>, start: &str) -> String {
    let mut path = vec![start];
    let mut position = HashMap::from([(start, 0usize)]);
    let mut current = start;
    loop {
        match raw.get(current) {
            None => return current.to_owned(),
            Some(next) if next == current => return current.to_owned(),
            Some(next) => {
                if let Some(&i) = position.get(next.as_str()) {
                    return path[i..].iter().min().unwrap().to_string();
                }
                position.insert(next, path.len());
                path.push(next);
                current = next;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_fallback() {
        let t = LemmaTable::new([("regnet", "regnen")]).unwrap();
        assert_eq!(t.lemmatize("regnet"), "regnen");
        assert_eq!(t.lemmatize("sonne"), "sonne");
    }

    #[test]
    fn chains_and_cycles_are_resolved() {
        let t = LemmaTable::new([("a", "b"), ("b", "c")]).unwrap();
        assert_eq!(t.lemmatize("a"), "c");
        let t = LemmaTable::new([("x", "y"), ("y", "x")]).unwrap();
        assert_eq!(t.lemmatize(t.lemmatize("x")), t.lemmatize("x"));
        assert_eq!(t.lemmatize(t.lemmatize("y")), t.lemmatize("y"));
    }

    #[test]
    fn rejects_empty_lemma() {
        assert!(LemmaTable::new([("a", "")]).is_err());
    }

    #[test]
    fn loads_tab_separated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lemmas.tsv");
        fs::write(&p, "regnet\tregnen\nwinde\twind\n").unwrap();
        let t = LemmaTable::load(&p).unwrap();
        assert_eq!(t.len(), 2);
        fs::write(&p, "regnet regnen\n").unwrap();
        assert!(LemmaTable::load(&p).is_err());
    }

    proptest! {
        #[test]
        fn lemmatization_is_idempotent(pairs in proptest::collection::vec(("[a-d]{1,2}", "[a-d]{1,2}"), 0..12)) {
            let t = LemmaTable::new(pairs.clone()).unwrap();
            for (surface, _) in &pairs {
                let once = t.lemmatize(surface).to_owned();
                prop_assert_eq!(t.lemmatize(&once), once.as_str());
            }
        }
    }
}
