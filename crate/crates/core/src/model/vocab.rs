//! Symbol tables and the pretrained word-vector loader.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::{Corpus, UPOS_TAGS};

pub const UNKNOWN: &str = "<unk>";
pub const OUTSIDE: &str = "O";

/// String ↔ index map. Index 0 is the unknown symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(vocab: Vocab) -> Self {
        vocab.items
    }
}

impl Vocab {
    /// Unknown symbol followed by `items` in the given order, duplicates dropped.
    pub fn with_unknown<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = vec![UNKNOWN.to_string()];
        let mut seen: BTreeSet<String> = BTreeSet::from([UNKNOWN.to_string()]);
        for item in items {
            let item = item.into();
            if seen.insert(item.clone()) {
                out.push(item);
            }
        }
        Vocab::from(out)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Index of `symbol`, or 0 for unknown symbols.
    pub fn lookup(&self, symbol: &str) -> usize {
        self.get(symbol).unwrap_or(0)
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.items[index]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// All symbol tables a model needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub words: Vocab,
    pub tags: Vocab,
    /// Output labels; index 0 is [`OUTSIDE`].
    pub labels: Vec<String>,
    /// Sorted language IDs.
    pub languages: Vec<String>,
}

impl Vocabs {
    /// Word forms, tags, roles and languages observed in `corpus`, in
    /// first-seen (words) or sorted (everything else) order.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let words = Vocab::with_unknown(
            corpus
                .sentences()
                .iter()
                .flat_map(|s| s.tokens.iter().map(|t| t.form.clone())),
        );
        let observed: BTreeSet<&str> = corpus
            .sentences()
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.upos.as_str()))
            .collect();
        let tags = Vocab::with_unknown(
            UPOS_TAGS
                .iter()
                .copied()
                .chain(observed.into_iter().filter(|t| !UPOS_TAGS.contains(t))),
        );
        let labels = std::iter::once(OUTSIDE.to_string())
            .chain(corpus.role_inventory().iter().filter(|r| *r != OUTSIDE).cloned())
            .collect();
        Vocabs {
            words,
            tags,
            labels,
            languages: corpus.languages().into_iter().collect(),
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn language_index(&self, lang: &str) -> Option<usize> {
        self.languages.binary_search_by(|l| l.as_str().cmp(lang)).ok()
    }
}

/// Word vectors read from the `count dim` text format.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub words: Vec<String>,
    pub dim: usize,
    /// Row-major `words.len() × dim`.
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn vector(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ModelError> {
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, message: String| ModelError::Embeddings { line, message };

        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing `count dim` header".into()))?;
        let header = header?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad(1, format!("malformed header {header:?}")))?;
        let [count, dim] = dims[..] else {
            return Err(bad(1, format!("expected `count dim`, found {header:?}")));
        };
        if dim == 0 {
            return Err(bad(1, "dimension must be positive".into()));
        }

        let mut words = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line").to_string();
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(i + 1, "malformed vector component".into()))?;
            if values.len() != dim {
                return Err(bad(i + 1, format!("expected {dim} components, found {}", values.len())));
            }
            if !seen.insert(word.clone()) {
                return Err(bad(i + 1, format!("duplicate word {word:?}")));
            }
            words.push(word);
            data.extend(values);
        }
        if words.len() != count {
            return Err(bad(1, format!("header announces {count} words, file has {}", words.len())));
        }
        Ok(Embeddings { words, dim, data })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let file = std::fs::File::open(path)?;
        Embeddings::read(std::io::BufReader::new(file))
    }
}
