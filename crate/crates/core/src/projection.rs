//! Projection of source predicate frames onto translated sentences.
//!
//! Every SRL-related source word (a predicate or one of its arguments) is
//! mapped to its most probable target word and scored by
//! `a(f|e) * p(t_e|f)`, the alignment probability times the probability that
//! the target word carries the source word's POS tag. Conflicts on a target
//! word are settled in two phases over the whole sentence:
//!
//! 1. Predicates competing for one target word: the highest score wins
//!    (smaller source index on ties) and every losing frame is dropped.
//! 2. Arguments of the surviving frames: a target word already taken by a
//!    surviving predicate rejects arguments from other source words; otherwise
//!    the best-scoring source word keeps the target word.
//!
//! Candidates coming from the same source word never conflict: a word that is
//! an argument of two predicates keeps both roles on its target word.
//! Finally a predicate scoring below the threshold takes its frame with it,
//! while a low-scoring argument is removed alone.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::alignment::{AlignmentError, AlignmentTable};
use crate::corpus::{Argument, Corpus, PredicateFrame, Sentence};
use crate::postag::{PosDistribution, DEFAULT_SMOOTHING};

pub const DEFAULT_ALPHA: f64 = 0.4;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("threshold alpha {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("{sources} source sentences but {translations} translations")]
    LengthMismatch { sources: usize, translations: usize },
    #[error("sentence {index}: {source}")]
    Alignment {
        index: usize,
        source: AlignmentError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CandidateKind {
    Predicate,
    Argument,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCandidate {
    pub src_index: usize,
    pub tgt_index: usize,
    pub kind: CandidateKind,
    /// Sense for predicates, role for arguments.
    pub label: String,
    pub score: f64,
    /// Position of the source frame within its sentence.
    pub frame_id: usize,
}

impl ProjectionCandidate {
    /// True when `self` wins a same-kind contest against `other`.
    fn beats(&self, other: &ProjectionCandidate) -> bool {
        self.score > other.score || (self.score == other.score && self.src_index < other.src_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    alpha: f64,
    /// Overrides the alignment table's floor when set.
    pub floor: Option<f64>,
    /// Add-k smoothing for POS distributions fitted alongside projection.
    pub k: f64,
    /// Lowercase both sides before alignment lookups.
    pub lowercase: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            alpha: DEFAULT_ALPHA,
            floor: None,
            k: DEFAULT_SMOOTHING,
            lowercase: false,
        }
    }
}

impl ProjectionConfig {
    pub fn with_alpha(alpha: f64) -> Result<Self, ProjectionError> {
        let mut config = ProjectionConfig::default();
        config.set_alpha(alpha)?;
        Ok(config)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), ProjectionError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ProjectionError::BadAlpha(alpha));
        }
        self.alpha = alpha;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectionStats {
    pub frames_in: usize,
    pub frames_kept: usize,
    pub frames_dropped_threshold: usize,
    pub frames_dropped_collision: usize,
    pub args_in: usize,
    pub args_kept: usize,
    pub args_dropped_threshold: usize,
    pub args_dropped_collision: usize,
}

impl ProjectionStats {
    pub const KEYS: [&'static str; 8] = [
        "frames_in",
        "frames_kept",
        "frames_dropped_threshold",
        "frames_dropped_collision",
        "args_in",
        "args_kept",
        "args_dropped_threshold",
        "args_dropped_collision",
    ];

    pub fn values(&self) -> [usize; 8] {
        [
            self.frames_in,
            self.frames_kept,
            self.frames_dropped_threshold,
            self.frames_dropped_collision,
            self.args_in,
            self.args_kept,
            self.args_dropped_threshold,
            self.args_dropped_collision,
        ]
    }

    pub fn merge(&mut self, other: &ProjectionStats) {
        self.frames_in += other.frames_in;
        self.frames_kept += other.frames_kept;
        self.frames_dropped_threshold += other.frames_dropped_threshold;
        self.frames_dropped_collision += other.frames_dropped_collision;
        self.args_in += other.args_in;
        self.args_kept += other.args_kept;
        self.args_dropped_threshold += other.args_dropped_threshold;
        self.args_dropped_collision += other.args_dropped_collision;
    }

    pub fn is_consistent(&self) -> bool {
        self.frames_kept + self.frames_dropped_threshold + self.frames_dropped_collision == self.frames_in
            && self.args_kept + self.args_dropped_threshold + self.args_dropped_collision == self.args_in
    }

    /// `key\tvalue` lines in field order.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        for (key, value) in Self::KEYS.iter().zip(self.values()) {
            let _ = writeln!(out, "{key}\t{value}");
        }
        out
    }
}

/// Projection confidence: alignment probability times POS compatibility.
pub fn score_projection(align: f64, pos: f64) -> Result<f64, ProjectionError> {
    for p in [align, pos] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ProjectionError::OutOfRange(p));
        }
    }
    Ok(align * pos)
}

fn lookup_form(form: &str, lowercase: bool) -> Cow<'_, str> {
    if lowercase {
        Cow::Owned(form.to_lowercase())
    } else {
        Cow::Borrowed(form)
    }
}

/// One candidate for the predicate and one per argument, predicate first.
///
/// A source tag outside the distribution's tagset scores zero.
pub fn project_frame(
    frame: &PredicateFrame,
    frame_id: usize,
    src: &Sentence,
    tgt: &Sentence,
    table: &AlignmentTable,
    dist: &PosDistribution,
    lowercase: bool,
) -> Result<Vec<ProjectionCandidate>, AlignmentError> {
    let tgt_forms: Vec<Cow<'_, str>> = tgt
        .tokens
        .iter()
        .map(|t| lookup_form(&t.form, lowercase))
        .collect();

    let words = std::iter::once((frame.pred_index, CandidateKind::Predicate, &frame.sense)).chain(
        frame
            .args
            .iter()
            .map(|a| (a.index, CandidateKind::Argument, &a.role)),
    );

    let mut out = Vec::with_capacity(frame.args.len() + 1);
    for (src_index, kind, label) in words {
        let token = src
            .token(src_index)
            .expect("frame indices are within the source sentence");
        let (tgt_index, align) = table.best_target(&lookup_form(&token.form, lowercase), &tgt_forms)?;
        let target_form = &tgt.tokens[tgt_index - 1].form;
        let pos = dist.pos_prob(target_form, &token.upos).unwrap_or(0.0);
        out.push(ProjectionCandidate {
            src_index,
            tgt_index,
            kind,
            label: label.clone(),
            score: align * pos,
            frame_id,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Collision,
    Threshold,
}

#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub kept: Vec<ProjectionCandidate>,
    pub dropped: Vec<(ProjectionCandidate, DropReason)>,
}

/// Settles many-to-one conflicts among all candidates of one sentence.
pub fn resolve_collisions(candidates: Vec<ProjectionCandidate>) -> Resolution {
    // Phase 1: predicate against predicate.
    let mut best_predicate: BTreeMap<usize, &ProjectionCandidate> = BTreeMap::new();
    for c in candidates.iter().filter(|c| c.kind == CandidateKind::Predicate) {
        match best_predicate.get(&c.tgt_index) {
            Some(best) if !c.beats(best) => {}
            _ => {
                best_predicate.insert(c.tgt_index, c);
            }
        }
    }
    let surviving_frames: BTreeSet<usize> = best_predicate.values().map(|c| c.frame_id).collect();
    let predicate_owner: BTreeMap<usize, usize> = best_predicate
        .iter()
        .map(|(&tgt, c)| (tgt, c.src_index))
        .collect();

    // Phase 2: arguments of surviving frames. The owner of a target word is
    // the surviving predicate's source word, else the best argument's.
    let mut owner = predicate_owner.clone();
    let mut best_argument: BTreeMap<usize, &ProjectionCandidate> = BTreeMap::new();
    for c in candidates.iter().filter(|c| {
        c.kind == CandidateKind::Argument
            && surviving_frames.contains(&c.frame_id)
            && !predicate_owner.contains_key(&c.tgt_index)
    }) {
        match best_argument.get(&c.tgt_index) {
            Some(best) if !c.beats(best) => {}
            _ => {
                best_argument.insert(c.tgt_index, c);
            }
        }
    }
    owner.extend(best_argument.iter().map(|(&tgt, c)| (tgt, c.src_index)));

    let mut resolution = Resolution::default();
    for c in candidates {
        let survives = surviving_frames.contains(&c.frame_id) && owner.get(&c.tgt_index) == Some(&c.src_index);
        if survives {
            resolution.kept.push(c);
        } else {
            resolution.dropped.push((c, DropReason::Collision));
        }
    }
    resolution
}

/// Removes predicates scoring below alpha together with their frames, and
/// low-scoring arguments on their own. Returns `(kept, dropped)`.
pub fn apply_threshold(
    kept: Vec<ProjectionCandidate>,
    alpha: f64,
) -> (Vec<ProjectionCandidate>, Vec<ProjectionCandidate>) {
    let failed_frames: BTreeSet<usize> = kept
        .iter()
        .filter(|c| c.kind == CandidateKind::Predicate && c.score < alpha)
        .map(|c| c.frame_id)
        .collect();
    kept.into_iter()
        .partition(|c| c.score >= alpha && !failed_frames.contains(&c.frame_id))
}

/// Projected target sentence and its bookkeeping.
#[derive(Debug, Clone)]
pub struct SentenceProjection {
    pub sentence: Sentence,
    pub stats: ProjectionStats,
}

pub fn project_sentence(
    src: &Sentence,
    tgt: &Sentence,
    table: &AlignmentTable,
    dist: &PosDistribution,
    config: &ProjectionConfig,
) -> Result<SentenceProjection, AlignmentError> {
    let mut candidates = Vec::new();
    for (frame_id, frame) in src.frames.iter().enumerate() {
        candidates.extend(project_frame(frame, frame_id, src, tgt, table, dist, config.lowercase)?);
    }

    let resolution = resolve_collisions(candidates);
    let collided: Vec<ProjectionCandidate> = resolution.dropped.into_iter().map(|(c, _)| c).collect();
    let (kept, thresholded) = apply_threshold(resolution.kept, config.alpha);

    let mut stats = ProjectionStats {
        frames_in: src.frames.len(),
        args_in: src.frames.iter().map(|f| f.args.len()).sum(),
        ..Default::default()
    };
    for c in &collided {
        match c.kind {
            CandidateKind::Predicate => stats.frames_dropped_collision += 1,
            CandidateKind::Argument => stats.args_dropped_collision += 1,
        }
    }
    for c in &thresholded {
        match c.kind {
            CandidateKind::Predicate => stats.frames_dropped_threshold += 1,
            CandidateKind::Argument => stats.args_dropped_threshold += 1,
        }
    }

    let mut frames: BTreeMap<usize, PredicateFrame> = BTreeMap::new();
    for c in kept.iter().filter(|c| c.kind == CandidateKind::Predicate) {
        frames.insert(c.frame_id, PredicateFrame::new(c.tgt_index, c.label.clone(), Vec::new()));
        stats.frames_kept += 1;
    }
    for c in kept.iter().filter(|c| c.kind == CandidateKind::Argument) {
        let frame = frames
            .get_mut(&c.frame_id)
            .expect("surviving arguments belong to surviving frames");
        frame.args.push(Argument::new(c.tgt_index, c.label.clone()));
        stats.args_kept += 1;
    }

    let mut sentence = tgt.clone();
    sentence.frames = frames.into_values().collect();
    sentence.canonicalize();
    Ok(SentenceProjection { sentence, stats })
}

/// Projects every source sentence onto its index-aligned translation.
pub fn project_corpus(
    src: &Corpus,
    translations: &[Sentence],
    table: &AlignmentTable,
    dist: &PosDistribution,
    config: &ProjectionConfig,
) -> Result<(Corpus, ProjectionStats), ProjectionError> {
    project_corpus_threaded(src, translations, table, dist, config, 1)
}

/// Same as [`project_corpus`], splitting sentences over `threads` workers.
/// Output is identical for any thread count.
pub fn project_corpus_threaded(
    src: &Corpus,
    translations: &[Sentence],
    table: &AlignmentTable,
    dist: &PosDistribution,
    config: &ProjectionConfig,
    threads: usize,
) -> Result<(Corpus, ProjectionStats), ProjectionError> {
    if src.len() != translations.len() {
        return Err(ProjectionError::LengthMismatch {
            sources: src.len(),
            translations: translations.len(),
        });
    }
    let table: Cow<'_, AlignmentTable> = match config.floor {
        Some(floor) if floor != table.floor() => Cow::Owned(table.clone().with_floor(floor)),
        _ => Cow::Borrowed(table),
    };
    let table = table.as_ref();

    let pairs: Vec<(usize, (&Sentence, &Sentence))> = src.sentences().iter().zip(translations).enumerate().collect();
    let run = |chunk: &[(usize, (&Sentence, &Sentence))]| -> Result<Vec<SentenceProjection>, ProjectionError> {
        chunk
            .iter()
            .map(|&(index, (s, t))| {
                project_sentence(s, t, table, dist, config)
                    .map_err(|source| ProjectionError::Alignment { index, source })
            })
            .collect()
    };

    let threads = threads.max(1);
    let results: Vec<SentenceProjection> = if threads == 1 || pairs.len() < 2 {
        run(&pairs)?
    } else {
        let chunk_size = pairs.len().div_ceil(threads);
        let chunks: Vec<Result<Vec<SentenceProjection>, ProjectionError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .chunks(chunk_size)
                .map(|chunk| scope.spawn(move || run(chunk)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("projection worker panicked"))
                .collect()
        });
        let mut flat = Vec::with_capacity(pairs.len());
        for chunk in chunks {
            flat.extend(chunk?);
        }
        flat
    };

    let mut stats = ProjectionStats::default();
    let mut sentences = Vec::with_capacity(results.len());
    for r in results {
        stats.merge(&r.stats);
        sentences.push(r.sentence);
    }
    Ok((Corpus::new(sentences), stats))
}
