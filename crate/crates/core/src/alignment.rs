//! Lexical translation probabilities `a(f|e)` from IBM Model 1.
//!
//! The model generates every target word from one source position, where
//! position 0 is the empty word [`NULL_WORD`]. Probabilities are normalized
//! over target words for each source word, NULL included.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Source-side empty word. Reserved: a real token with this spelling collides.
pub const NULL_WORD: &str = "<NULL>";

pub const DEFAULT_FLOOR: f64 = 0.0;

/// Slack allowed on per-source sums when loading external tables.
const LOAD_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("no sentence pairs")]
    NoPairs,
    #[error("pair {index}: empty {side} side")]
    EmptySide { index: usize, side: &'static str },
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("floor {0} must be a probability")]
    BadFloor(f64),
    #[error("empty target sentence")]
    EmptyTarget,
    #[error("line {line}: missing ` ||| ` separator")]
    MissingSeparator { line: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: probability out of range: {value}")]
    OutOfRange { line: usize, value: f64 },
    #[error("source word {word:?}: probabilities sum to {sum}")]
    Unnormalized { word: String, sum: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

impl ParallelPair {
    pub fn new<S: AsRef<str>>(src: &[S], tgt: &[S]) -> Self {
        ParallelPair {
            src: src.iter().map(|s| s.as_ref().to_string()).collect(),
            tgt: tgt.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    /// Builds a pair from two space-separated strings.
    pub fn from_text(src: &str, tgt: &str) -> Self {
        ParallelPair {
            src: src.split_whitespace().map(str::to_string).collect(),
            tgt: tgt.split_whitespace().map(str::to_string).collect(),
        }
    }
}

/// Reads `src tokens ||| tgt tokens` lines (fast_align layout).
pub fn parse_parallel(text: &str, lowercase: bool) -> Result<Vec<ParallelPair>, AlignmentError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let (src, tgt) = line
            .split_once("|||")
            .ok_or(AlignmentError::MissingSeparator { line: line_no })?;
        let (src, tgt) = if lowercase {
            (src.to_lowercase(), tgt.to_lowercase())
        } else {
            (src.to_string(), tgt.to_string())
        };
        let pair = ParallelPair::from_text(&src, &tgt);
        for (side, tokens) in [("source", &pair.src), ("target", &pair.tgt)] {
            if tokens.is_empty() {
                return Err(AlignmentError::Format {
                    line: line_no,
                    message: format!("empty {side} side"),
                });
            }
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTable {
    probs: BTreeMap<String, BTreeMap<String, f64>>,
    floor: f64,
}

impl Default for AlignmentTable {
    fn default() -> Self {
        AlignmentTable::new(DEFAULT_FLOOR)
    }
}

impl AlignmentTable {
    pub fn new(floor: f64) -> Self {
        AlignmentTable {
            probs: BTreeMap::new(),
            floor,
        }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn insert(&mut self, e: impl Into<String>, f: impl Into<String>, prob: f64) {
        self.probs.entry(e.into()).or_default().insert(f.into(), prob);
    }

    pub fn len(&self) -> usize {
        self.probs.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source_vocab(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    pub fn target_vocab(&self) -> std::collections::BTreeSet<&str> {
        self.probs
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    /// Stored distribution of one source word.
    pub fn distribution(&self, e: &str) -> Option<&BTreeMap<String, f64>> {
        self.probs.get(e)
    }

    /// Entries in `(source, target)` order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.probs.iter().flat_map(|(e, dist)| {
            dist.iter()
                .map(move |(f, p)| (e.as_str(), f.as_str(), *p))
        })
    }

    /// `a(f|e)`, or the floor for unseen pairs.
    pub fn align_prob(&self, e: &str, f: &str) -> f64 {
        self.probs
            .get(e)
            .and_then(|dist| dist.get(f))
            .copied()
            .unwrap_or(self.floor)
    }

    /// 1-based index of the target token maximizing `a(f|e)`, smallest index on ties.
    pub fn best_target<S: AsRef<str>>(&self, e: &str, tgt: &[S]) -> Result<(usize, f64), AlignmentError> {
        let mut best: Option<(usize, f64)> = None;
        for (j, f) in tgt.iter().enumerate() {
            let p = self.align_prob(e, f.as_ref());
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((j + 1, p));
            }
        }
        best.ok_or(AlignmentError::EmptyTarget)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("floor\t{}\n", self.floor);
        for (e, f, p) in self.entries() {
            let _ = writeln!(out, "{e}\t{f}\t{p}");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, AlignmentError> {
        let mut lines = text.lines().enumerate().peekable();
        let mut table = AlignmentTable::default();
        if let Some((_, header)) = lines.peek() {
            if let Some(value) = header.strip_prefix("floor\t") {
                let floor = parse_prob(1, value)?;
                table.floor = floor;
                lines.next();
            }
        }
        for (i, line) in lines {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(AlignmentError::Format {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let prob = parse_prob(line_no, fields[2])?;
            table.insert(fields[0], fields[1], prob);
        }
        for (e, dist) in &table.probs {
            let sum: f64 = dist.values().sum();
            if sum > 1.0 + LOAD_SUM_TOLERANCE {
                return Err(AlignmentError::Unnormalized {
                    word: e.clone(),
                    sum,
                });
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AlignmentError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AlignmentError> {
        AlignmentTable::from_tsv(&std::fs::read_to_string(path)?)
    }
}

fn parse_prob(line: usize, value: &str) -> Result<f64, AlignmentError> {
    let p: f64 = value.trim().parse().map_err(|_| AlignmentError::Format {
        line,
        message: format!("malformed probability {value:?}"),
    })?;
    if !(0.0..=1.0).contains(&p) {
        return Err(AlignmentError::OutOfRange { line, value: p });
    }
    Ok(p)
}

/// Result of EM training.
#[derive(Debug, Clone)]
pub struct Ibm1Model {
    pub table: AlignmentTable,
    /// Corpus log-likelihood under the parameters entering each iteration.
    pub log_likelihoods: Vec<f64>,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, usize>,
    words: Vec<String>,
}

impl Interner {
    fn id(&mut self, word: &str) -> usize {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len();
        self.ids.insert(word.to_string(), id);
        self.words.push(word.to_string());
        id
    }
}

/// IBM Model 1 EM, initialized uniformly over the target vocabulary.
pub fn ibm1_train(pairs: &[ParallelPair], iterations: usize, floor: f64) -> Result<Ibm1Model, AlignmentError> {
    if iterations == 0 {
        return Err(AlignmentError::NoIterations);
    }
    if pairs.is_empty() {
        return Err(AlignmentError::NoPairs);
    }
    if !(0.0..=1.0).contains(&floor) {
        return Err(AlignmentError::BadFloor(floor));
    }

    let mut sources = Interner::default();
    let mut targets = Interner::default();
    let null = sources.id(NULL_WORD);
    let mut encoded = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        if pair.src.is_empty() {
            return Err(AlignmentError::EmptySide { index, side: "source" });
        }
        if pair.tgt.is_empty() {
            return Err(AlignmentError::EmptySide { index, side: "target" });
        }
        let src: Vec<usize> = std::iter::once(null)
            .chain(pair.src.iter().map(|w| sources.id(w)))
            .collect();
        let tgt: Vec<usize> = pair.tgt.iter().map(|w| targets.id(w)).collect();
        encoded.push((src, tgt));
    }

    let uniform = 1.0 / targets.words.len() as f64;
    let mut t: HashMap<(usize, usize), f64> = HashMap::new();
    for (src, tgt) in &encoded {
        for &e in src {
            for &f in tgt {
                t.insert((e, f), uniform);
            }
        }
    }

    let mut log_likelihoods = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut counts: HashMap<(usize, usize), f64> = HashMap::with_capacity(t.len());
        let mut totals = vec![0.0; sources.words.len()];
        let mut ll = 0.0;
        for (src, tgt) in &encoded {
            let positions = src.len() as f64;
            for &f in tgt {
                let denom: f64 = src.iter().map(|&e| t[&(e, f)]).sum();
                ll += (denom / positions).ln();
                for &e in src {
                    let posterior = t[&(e, f)] / denom;
                    *counts.entry((e, f)).or_insert(0.0) += posterior;
                    totals[e] += posterior;
                }
            }
        }
        log_likelihoods.push(ll);
        for (key, count) in counts {
            t.insert(key, count / totals[key.0]);
        }
    }

    let mut table = AlignmentTable::new(floor);
    for (&(e, f), &p) in &t {
        table.insert(sources.words[e].clone(), targets.words[f].clone(), p);
    }
    Ok(Ibm1Model {
        table,
        log_likelihoods,
    })
}
