//! Lexical POS distributions `p(t|f)` for target words.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{Corpus, EMPTY, UPOS_TAGS};

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Slack on row sums when loading distributions computed elsewhere.
const LOAD_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PosError {
    #[error("corpus has no POS-tagged tokens")]
    EmptyCorpus,
    #[error("smoothing constant {0} must be non-negative")]
    BadSmoothing(f64),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("word {word:?}: probabilities sum to {sum}")]
    Unnormalized { word: String, sum: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-word tag distributions; unseen words get the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PosDistribution {
    tagset: Vec<String>,
    dist: BTreeMap<String, Vec<f64>>,
}

impl Default for PosDistribution {
    fn default() -> Self {
        PosDistribution::new(UPOS_TAGS.iter().map(|t| t.to_string()).collect())
    }
}

impl PosDistribution {
    /// An empty distribution over `tagset`; panics on an empty or duplicated tagset.
    pub fn new(tagset: Vec<String>) -> Self {
        assert!(!tagset.is_empty(), "empty tagset");
        let mut sorted = tagset.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), tagset.len(), "duplicate tags");
        PosDistribution {
            tagset,
            dist: BTreeMap::new(),
        }
    }

    pub fn tagset(&self) -> &[String] {
        &self.tagset
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.dist.keys().map(String::as_str)
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tagset.iter().position(|t| t == tag)
    }

    /// Sets a word's row; it must have one entry per tag.
    pub fn insert(&mut self, word: impl Into<String>, row: Vec<f64>) {
        assert_eq!(row.len(), self.tagset.len());
        self.dist.insert(word.into(), row);
    }

    pub fn row(&self, word: &str) -> Option<&[f64]> {
        self.dist.get(word).map(Vec::as_slice)
    }

    fn uniform(&self) -> f64 {
        1.0 / self.tagset.len() as f64
    }

    pub fn pos_prob(&self, word: &str, tag: &str) -> Result<f64, PosError> {
        let t = self
            .tag_index(tag)
            .ok_or_else(|| PosError::UnknownTag(tag.to_string()))?;
        Ok(self.dist.get(word).map_or(self.uniform(), |row| row[t]))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("tagset\t{}\n", self.tagset.join(","));
        for (word, row) in &self.dist {
            for (tag, p) in self.tagset.iter().zip(row) {
                if *p != 0.0 {
                    let _ = writeln!(out, "{word}\t{tag}\t{p}");
                }
            }
        }
        out
    }

    /// Parses the TSV layout. Rows are renormalized when they are off from 1
    /// by more than 1e-9; a row above 1 + 1e-6 is an error.
    pub fn from_tsv(text: &str) -> Result<Self, PosError> {
        let mut lines = text.lines().enumerate().peekable();
        let mut out = match lines.peek() {
            Some((_, header)) if header.starts_with("tagset\t") => {
                let tags: Vec<String> = header["tagset\t".len()..]
                    .split(',')
                    .map(str::to_string)
                    .collect();
                let mut sorted = tags.clone();
                sorted.sort();
                sorted.dedup();
                if tags.iter().any(|t| t.is_empty()) || sorted.len() != tags.len() {
                    return Err(PosError::Format {
                        line: 1,
                        message: "tagset must be non-empty and duplicate-free".into(),
                    });
                }
                lines.next();
                PosDistribution::new(tags)
            }
            _ => PosDistribution::default(),
        };

        for (i, line) in lines {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(PosError::Format {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let t = out.tag_index(fields[1]).ok_or_else(|| PosError::Format {
                line: line_no,
                message: format!("tag {:?} not in tagset", fields[1]),
            })?;
            let p: f64 = fields[2].parse().map_err(|_| PosError::Format {
                line: line_no,
                message: format!("malformed probability {:?}", fields[2]),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(PosError::Format {
                    line: line_no,
                    message: format!("probability out of range: {p}"),
                });
            }
            let width = out.tagset.len();
            out.dist
                .entry(fields[0].to_string())
                .or_insert_with(|| vec![0.0; width])[t] = p;
        }

        for (word, row) in out.dist.iter_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + LOAD_SUM_TOLERANCE || sum <= 0.0 {
                return Err(PosError::Unnormalized {
                    word: word.clone(),
                    sum,
                });
            }
            if (sum - 1.0).abs() > 1e-9 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PosError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PosError> {
        PosDistribution::from_tsv(&std::fs::read_to_string(path)?)
    }
}

/// Add-k estimate `p(t|f) = (c(f,t) + k) / (c(f) + k|T|)` from a tagged corpus.
///
/// The tagset is the universal inventory followed by any other observed tags
/// in sorted order. Tokens tagged `_` are ignored.
pub fn fit_pos_emission(tagged: &Corpus, k: f64) -> Result<PosDistribution, PosError> {
    if !(k >= 0.0) {
        return Err(PosError::BadSmoothing(k));
    }
    let mut extra: Vec<String> = Vec::new();
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for token in tagged.sentences().iter().flat_map(|s| &s.tokens) {
        if token.upos == EMPTY {
            continue;
        }
        if !UPOS_TAGS.contains(&token.upos.as_str()) && !extra.contains(&token.upos) {
            extra.push(token.upos.clone());
        }
        *counts
            .entry(&token.form)
            .or_default()
            .entry(&token.upos)
            .or_default() += 1;
    }
    if counts.is_empty() {
        return Err(PosError::EmptyCorpus);
    }
    extra.sort();

    let tagset: Vec<String> = UPOS_TAGS
        .iter()
        .map(|t| t.to_string())
        .chain(extra)
        .collect();
    let mut out = PosDistribution::new(tagset);
    let width = out.tagset.len() as f64;
    for (word, tags) in counts {
        let total: usize = tags.values().sum();
        let denom = total as f64 + k * width;
        let row = out
            .tagset
            .iter()
            .map(|t| (tags.get(t.as_str()).copied().unwrap_or(0) as f64 + k) / denom)
            .collect();
        out.dist.insert(word.to_string(), row);
    }
    Ok(out)
}
