//! Scoring: micro precision/recall/F1 over (predicate, argument, role)
//! triples, broken down by role and by predicate–argument distance, plus the
//! language-embedding distance matrix of a trained model.
//!
//! An argument is correct when its sentence, predicate token, argument token
//! and role all match a gold argument. Predicates are inputs, so both corpora
//! must carry the same predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::model::{ModelError, SrlModel};

pub const DEFAULT_ROLES: [&str; 4] = ["A0", "A1", "A2", "AM-TMP"];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    SentenceCount { gold: usize, pred: usize },
    #[error("sentence {sentence}: predicate sets differ (gold {gold:?}, prediction {pred:?})")]
    PredicateMismatch {
        sentence: usize,
        gold: Vec<usize>,
        pred: Vec<usize>,
    },
    #[error("distance buckets {0} and {1} overlap")]
    OverlappingBuckets(String, String),
    #[error("invalid distance bucket {0:?}")]
    BadBucket(String),
    #[error("report line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Pooled confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    pub fn score(&self) -> Score {
        Score {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            support: self.gold,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold arguments in this cell.
    pub support: usize,
}

impl Score {
    pub fn zero_support(&self) -> bool {
        self.support == 0
    }
}

/// Inclusive distance range; `hi == None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DistanceBucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl DistanceBucket {
    pub fn contains(&self, d: usize) -> bool {
        d >= self.lo && self.hi.is_none_or(|hi| d <= hi)
    }

    fn overlaps(&self, other: &DistanceBucket) -> bool {
        let below = |a: &DistanceBucket, b: &DistanceBucket| a.hi.is_some_and(|hi| hi < b.lo);
        !below(self, other) && !below(other, self)
    }
}

impl fmt::Display for DistanceBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{}-{}", self.lo, hi),
            None => write!(f, ">={}", self.lo),
        }
    }
}

impl FromStr for DistanceBucket {
    type Err = EvalError;

    /// Accepts `a-b`, `a` (single distance), `>=a` and `a+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::BadBucket(s.to_string());
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let bucket = if let Some(lo) = s.strip_prefix(">=") {
            DistanceBucket { lo: num(lo)?, hi: None }
        } else if let Some(lo) = s.strip_suffix('+') {
            DistanceBucket { lo: num(lo)?, hi: None }
        } else if let Some((lo, hi)) = s.split_once('-') {
            DistanceBucket {
                lo: num(lo)?,
                hi: Some(num(hi)?),
            }
        } else {
            let d = num(s)?;
            DistanceBucket { lo: d, hi: Some(d) }
        };
        if bucket.lo == 0 || bucket.hi.is_some_and(|hi| hi < bucket.lo) {
            return Err(bad());
        }
        Ok(bucket)
    }
}

pub fn default_buckets() -> Vec<DistanceBucket> {
    vec![
        DistanceBucket { lo: 1, hi: Some(2) },
        DistanceBucket { lo: 3, hi: Some(6) },
        DistanceBucket { lo: 7, hi: None },
    ]
}

/// Parses a comma-separated bucket list and rejects overlaps.
pub fn parse_buckets(text: &str) -> Result<Vec<DistanceBucket>, EvalError> {
    let buckets = text
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?;
    check_buckets(&buckets)?;
    Ok(buckets)
}

pub fn check_buckets(buckets: &[DistanceBucket]) -> Result<(), EvalError> {
    for (i, a) in buckets.iter().enumerate() {
        for b in &buckets[i + 1..] {
            if a.overlaps(b) {
                return Err(EvalError::OverlappingBuckets(a.to_string(), b.to_string()));
            }
        }
    }
    Ok(())
}

/// (sentence, predicate index, argument index, role).
type Triple = (usize, usize, usize, String);

fn triples(gold: &Corpus, pred: &Corpus) -> Result<(BTreeSet<Triple>, BTreeSet<Triple>), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut g = BTreeSet::new();
    let mut p = BTreeSet::new();
    for (s, (gs, ps)) in gold.sentences().iter().zip(pred.sentences()).enumerate() {
        let gp: Vec<usize> = gs.frames.iter().map(|f| f.pred_index).collect();
        let pp: Vec<usize> = ps.frames.iter().map(|f| f.pred_index).collect();
        if gp != pp {
            return Err(EvalError::PredicateMismatch {
                sentence: s + 1,
                gold: gp,
                pred: pp,
            });
        }
        for (set, sentence) in [(&mut g, gs), (&mut p, ps)] {
            for f in &sentence.frames {
                for a in &f.args {
                    set.insert((s, f.pred_index, a.index, a.role.clone()));
                }
            }
        }
    }
    Ok((g, p))
}

fn count<'a>(
    gold: &'a BTreeSet<Triple>,
    pred: &'a BTreeSet<Triple>,
    keep: impl Fn(&Triple) -> bool,
) -> Counts {
    Counts {
        correct: gold.intersection(pred).filter(|t| keep(t)).count(),
        predicted: pred.iter().filter(|t| keep(t)).count(),
        gold: gold.iter().filter(|t| keep(t)).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub per_role: BTreeMap<String, Score>,
    pub per_distance: Vec<(DistanceBucket, Score)>,
}

/// Overall scores, every role seen in either corpus, and the default
/// distance buckets.
pub fn srl_f1(gold: &Corpus, pred: &Corpus) -> Result<EvalReport, EvalError> {
    srl_f1_with(gold, pred, &[], &default_buckets())
}

/// Like [`srl_f1`], with `roles` always present in the role table (even at
/// zero support) and custom buckets.
pub fn srl_f1_with(
    gold: &Corpus,
    pred: &Corpus,
    roles: &[String],
    buckets: &[DistanceBucket],
) -> Result<EvalReport, EvalError> {
    check_buckets(buckets)?;
    let (g, p) = triples(gold, pred)?;
    let counts = count(&g, &p, |_| true);
    let mut all_roles: BTreeSet<String> = g.iter().chain(&p).map(|t| t.3.clone()).collect();
    all_roles.extend(roles.iter().cloned());
    let per_role = all_roles
        .into_iter()
        .map(|r| {
            let score = count(&g, &p, |t| t.3 == r).score();
            (r, score)
        })
        .collect();
    let per_distance = distance_table(&g, &p, buckets);
    Ok(EvalReport {
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        counts,
        per_role,
        per_distance,
    })
}

/// Scores restricted to each listed role.
pub fn per_role_f1(gold: &Corpus, pred: &Corpus, roles: &[String]) -> Result<BTreeMap<String, Score>, EvalError> {
    let (g, p) = triples(gold, pred)?;
    Ok(roles
        .iter()
        .map(|r| (r.clone(), count(&g, &p, |t| &t.3 == r).score()))
        .collect())
}

fn distance_table(g: &BTreeSet<Triple>, p: &BTreeSet<Triple>, buckets: &[DistanceBucket]) -> Vec<(DistanceBucket, Score)> {
    buckets
        .iter()
        .map(|b| (*b, count(g, p, |t| b.contains(t.1.abs_diff(t.2))).score()))
        .collect()
}

/// Scores by predicate–argument surface distance.
pub fn distance_f1(gold: &Corpus, pred: &Corpus, buckets: &[DistanceBucket]) -> Result<Vec<(DistanceBucket, Score)>, EvalError> {
    check_buckets(buckets)?;
    let (g, p) = triples(gold, pred)?;
    Ok(distance_table(&g, &p, buckets))
}

const ROLE_HEADER: &str = "role,precision,recall,f1,support,zero_support";
const DISTANCE_HEADER: &str = "bucket,precision,recall,f1,support";

impl EvalReport {
    /// `key\tvalue` lines followed by one CSV block per table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in [("precision", self.precision), ("recall", self.recall), ("f1", self.f1)] {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        for (k, v) in [
            ("gold", self.counts.gold),
            ("predicted", self.counts.predicted),
            ("correct", self.counts.correct),
        ] {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out.push_str("\n[per_role]\n");
        out.push_str(ROLE_HEADER);
        out.push('\n');
        for (role, s) in &self.per_role {
            out.push_str(&format!(
                "{role},{},{},{},{},{}\n",
                s.precision,
                s.recall,
                s.f1,
                s.support,
                s.zero_support()
            ));
        }
        out.push_str("\n[per_distance]\n");
        out.push_str(DISTANCE_HEADER);
        out.push('\n');
        for (b, s) in &self.per_distance {
            out.push_str(&format!("{b},{},{},{},{}\n", s.precision, s.recall, s.f1, s.support));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EvalError> {
        let mut scalars = BTreeMap::new();
        let mut per_role = BTreeMap::new();
        let mut per_distance = Vec::new();
        let mut section = "";
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| EvalError::Format { line: i + 1, message };
            if line.is_empty() || line == ROLE_HEADER || line == DISTANCE_HEADER {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[per_role]" => "role",
                    "[per_distance]" => "distance",
                    other => return Err(err(format!("unknown section {other}"))),
                };
                continue;
            }
            if section.is_empty() {
                let (k, v) = line.split_once('\t').ok_or_else(|| err("expected key<TAB>value".into()))?;
                let v: f64 = v.trim().parse().map_err(|_| err(format!("bad number {v:?}")))?;
                scalars.insert(k.to_string(), v);
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            let want = if section == "role" { 6 } else { 5 };
            if cells.len() != want {
                return Err(err(format!("expected {want} CSV cells, found {}", cells.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
            let score = Score {
                precision: num(cells[1])?,
                recall: num(cells[2])?,
                f1: num(cells[3])?,
                support: cells[4].parse().map_err(|_| err(format!("bad support {:?}", cells[4])))?,
            };
            if section == "role" {
                per_role.insert(cells[0].to_string(), score);
            } else {
                per_distance.push((cells[0].parse()?, score));
            }
        }
        let get = |k: &str| {
            scalars.get(k).copied().ok_or_else(|| EvalError::Format {
                line: 0,
                message: format!("missing key {k}"),
            })
        };
        Ok(EvalReport {
            precision: get("precision")?,
            recall: get("recall")?,
            f1: get("f1")?,
            counts: Counts {
                gold: get("gold")? as usize,
                predicted: get("predicted")? as usize,
                correct: get("correct")? as usize,
            },
            per_role,
            per_distance,
        })
    }
}

/// Mean and sample standard deviation over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub precision_mean: f64,
    pub recall_mean: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

pub fn aggregate(reports: &[EvalReport]) -> Aggregate {
    let n = reports.len();
    let mean = |f: fn(&EvalReport) -> f64| {
        if n == 0 {
            0.0
        } else {
            reports.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let f1_mean = mean(|r| r.f1);
    let f1_std = if n < 2 {
        0.0
    } else {
        (reports.iter().map(|r| (r.f1 - f1_mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Aggregate {
        runs: n,
        precision_mean: mean(|r| r.precision),
        recall_mean: mean(|r| r.recall),
        f1_mean,
        f1_std,
    }
}

impl Aggregate {
    pub fn to_text(&self) -> String {
        format!(
            "runs\t{}\nprecision_mean\t{}\nrecall_mean\t{}\nf1_mean\t{}\nf1_std\t{}\n",
            self.runs, self.precision_mean, self.recall_mean, self.f1_mean, self.f1_std
        )
    }
}

/// Pairwise Euclidean distances between a model's language embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub languages: Vec<String>,
    pub distances: Vec<Vec<f64>>,
}

pub fn language_similarity(model: &SrlModel) -> Result<SimilarityMatrix, ModelError> {
    Ok(SimilarityMatrix {
        languages: model.vocabs().languages.clone(),
        distances: model.language_distances()?,
    })
}

impl SimilarityMatrix {
    /// CSV with a language header row and a language column.
    pub fn to_csv(&self) -> String {
        let mut out = format!("lang,{}\n", self.languages.join(","));
        for (lang, row) in self.languages.iter().zip(&self.distances) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&format!("{lang},{}\n", cells.join(",")));
        }
        out
    }
}
