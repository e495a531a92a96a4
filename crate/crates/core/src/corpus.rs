//! Dependency SRL corpora in an extended CoNLL-U layout.
//!
//! Each token line carries the ten CoNLL-U columns followed by a `PRED`
//! column (predicate sense or `_`) and one `ARG` column per predicate of
//! the sentence, predicates ordered by token index:
//!
//! ```text
//! # sent_id = 1
//! # lang = EN
//! 1	dogs	dog	NOUN	_	_	2	nsubj	_	_	_	A0
//! 2	bark	bark	VERB	_	_	0	root	_	_	bark.01	_
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// The universal POS inventory, in canonical order.
pub const UPOS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// Placeholder for an empty field.
pub const EMPTY: &str = "_";

const CONLLU_COLUMNS: usize = 10;
const SRL_COLUMNS: usize = 11;

pub fn is_upos(tag: &str) -> bool {
    UPOS_TAGS.contains(&tag)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head token index, 0 for the root; `None` when the column is `_`.
    pub head: Option<usize>,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with only form and POS filled in.
    pub fn new(index: usize, form: impl Into<String>, upos: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            lemma: EMPTY.to_string(),
            upos: upos.into(),
            xpos: EMPTY.to_string(),
            feats: EMPTY.to_string(),
            head: None,
            deprel: EMPTY.to_string(),
            deps: EMPTY.to_string(),
            misc: EMPTY.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Argument {
    pub index: usize,
    pub role: String,
}

impl Argument {
    pub fn new(index: usize, role: impl Into<String>) -> Self {
        Argument {
            index,
            role: role.into(),
        }
    }
}

/// A predicate with its sense and role-labeled arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateFrame {
    pub pred_index: usize,
    pub sense: String,
    pub args: Vec<Argument>,
}

impl PredicateFrame {
    pub fn new(pred_index: usize, sense: impl Into<String>, args: Vec<Argument>) -> Self {
        PredicateFrame {
            pred_index,
            sense: sense.into(),
            args,
        }
    }

    /// Role of the token at `index`, if it is an argument of this frame.
    pub fn role_of(&self, index: usize) -> Option<&str> {
        self.args
            .iter()
            .find(|a| a.index == index)
            .map(|a| a.role.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub sent_id: String,
    pub lang: String,
    /// Comment lines other than `sent_id` and `lang`, verbatim including `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub frames: Vec<PredicateFrame>,
}

impl Sentence {
    pub fn new(lang: impl Into<String>, tokens: Vec<Token>, frames: Vec<PredicateFrame>) -> Self {
        let mut sentence = Sentence {
            lang: lang.into(),
            tokens,
            frames,
            ..Default::default()
        };
        sentence.canonicalize();
        sentence
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn frame(&self, pred_index: usize) -> Option<&PredicateFrame> {
        self.frames.iter().find(|f| f.pred_index == pred_index)
    }

    /// Sorts frames by predicate index and arguments by token index.
    pub fn canonicalize(&mut self) {
        self.frames.sort_by_key(|f| f.pred_index);
        for frame in &mut self.frames {
            frame.args.sort();
        }
    }

    /// Checks every sentence-level invariant; an empty result means valid.
    pub fn violations(&self) -> Vec<ViolationKind> {
        use ViolationKind::*;

        let mut out = Vec::new();
        let n = self.tokens.len();
        for (pos, token) in self.tokens.iter().enumerate() {
            if token.index != pos + 1 {
                out.push(NonContiguousIndex);
            }
            if token.form.is_empty() {
                out.push(EmptyForm);
            }
            if token.upos != EMPTY && !is_upos(&token.upos) {
                out.push(UnknownUpos);
            }
            let fields = [
                &token.form,
                &token.lemma,
                &token.upos,
                &token.xpos,
                &token.feats,
                &token.deprel,
                &token.deps,
                &token.misc,
            ];
            if fields.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
                out.push(UnserializableField);
            }
        }

        let mut predicates = BTreeSet::new();
        for frame in &self.frames {
            if frame.pred_index == 0 || frame.pred_index > n {
                out.push(PredicateOutOfRange);
            }
            if !predicates.insert(frame.pred_index) {
                out.push(DuplicatePredicate);
            }
            if !is_label(&frame.sense) {
                out.push(InvalidSense);
            }
            let mut seen = BTreeSet::new();
            for arg in &frame.args {
                if arg.index == 0 || arg.index > n {
                    out.push(ArgumentOutOfRange);
                }
                if !seen.insert(arg.index) {
                    out.push(DuplicateArgument);
                }
                if arg.index == frame.pred_index {
                    out.push(ReflexiveArgument);
                }
                if !is_label(&arg.role) {
                    out.push(InvalidRole);
                }
            }
        }
        out
    }
}

fn is_label(s: &str) -> bool {
    !s.is_empty() && s != EMPTY && !s.contains(char::is_whitespace)
}

/// An ordered collection of sentences with the inventory of roles they use.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    role_inventory: BTreeSet<String>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        let role_inventory = role_union(&sentences);
        Corpus {
            sentences,
            role_inventory,
        }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    pub fn role_inventory(&self) -> &BTreeSet<String> {
        &self.role_inventory
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Concatenation of two corpora, in order.
    pub fn concat(mut self, other: Corpus) -> Corpus {
        self.sentences.extend(other.sentences);
        Corpus::new(self.sentences)
    }

    /// Sorted set of language IDs used by the sentences.
    pub fn languages(&self) -> BTreeSet<String> {
        self.sentences.iter().map(|s| s.lang.clone()).collect()
    }

    pub fn frame_count(&self) -> usize {
        self.sentences.iter().map(|s| s.frames.len()).sum()
    }
}

fn role_union(sentences: &[Sentence]) -> BTreeSet<String> {
    sentences
        .iter()
        .flat_map(|s| s.frames.iter())
        .flat_map(|f| f.args.iter())
        .map(|a| a.role.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    NonContiguousIndex,
    EmptyForm,
    UnknownUpos,
    UnserializableField,
    PredicateOutOfRange,
    DuplicatePredicate,
    InvalidSense,
    ArgumentOutOfRange,
    DuplicateArgument,
    ReflexiveArgument,
    InvalidRole,
    RoleInventoryMismatch,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        use ViolationKind::*;
        match self {
            NonContiguousIndex => "E01",
            EmptyForm => "E02",
            UnknownUpos => "E03",
            UnserializableField => "E04",
            PredicateOutOfRange => "E05",
            DuplicatePredicate => "E06",
            InvalidSense => "E07",
            ArgumentOutOfRange => "E08",
            DuplicateArgument => "E09",
            ReflexiveArgument => "E10",
            InvalidRole => "E11",
            RoleInventoryMismatch => "E12",
        }
    }

    fn describe(self) -> &'static str {
        use ViolationKind::*;
        match self {
            NonContiguousIndex => "token indices are not 1..n",
            EmptyForm => "empty word form",
            UnknownUpos => "UPOS tag outside the universal inventory",
            UnserializableField => "field contains a tab or line break",
            PredicateOutOfRange => "predicate index out of range",
            DuplicatePredicate => "two frames share a predicate index",
            InvalidSense => "predicate sense must be a non-empty label other than `_`",
            ArgumentOutOfRange => "argument index out of range",
            DuplicateArgument => "argument index repeated within a frame",
            ReflexiveArgument => "argument index equals the predicate index",
            InvalidRole => "role must be a non-empty label other than `_`",
            RoleInventoryMismatch => "role inventory differs from the roles in use",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.code(), self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 0-based sentence position, `None` for corpus-level violations.
    pub sentence: Option<usize>,
    pub kind: ViolationKind,
}

/// Checks all corpus invariants.
pub fn validate(corpus: &Corpus) -> Vec<Violation> {
    let mut out: Vec<Violation> = corpus
        .sentences
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.violations().into_iter().map(move |kind| Violation {
                sentence: Some(i),
                kind,
            })
        })
        .collect();
    if role_union(&corpus.sentences) != corpus.role_inventory {
        out.push(Violation {
            sentence: None,
            kind: ViolationKind::RoleInventoryMismatch,
        });
    }
    out
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected ≥{expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: multiword tokens and empty nodes are not supported (ID {id:?})")]
    UnsupportedId { line: usize, id: String },
    #[error("line {line}: invalid token ID {id:?}")]
    BadId { line: usize, id: String },
    #[error("line {line}: token ID {found} breaks contiguity, expected {expected}")]
    NonContiguous {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: sentence has {predicates} predicates but the token line has {found} ARG columns")]
    ArgColumns {
        line: usize,
        predicates: usize,
        found: usize,
    },
    #[error("line {line}: invalid HEAD {value:?}")]
    BadHead { line: usize, value: String },
    #[error("line {line}: comment block without tokens")]
    EmptySentence { line: usize },
    #[error("line {line}: sentence has no `# lang = ..` comment and no default language was given")]
    MissingLanguage { line: usize },
    #[error("line {line}: {kind}")]
    Invalid { line: usize, kind: ViolationKind },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Options for [`parse_srl_corpus`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Language for sentences without a `# lang = ..` comment.
    pub default_lang: Option<String>,
    /// Accept plain 10-column CoNLL-U lines (sentences then carry no frames).
    pub allow_plain: bool,
}

impl ParseOptions {
    pub fn with_lang(lang: impl Into<String>) -> Self {
        ParseOptions {
            default_lang: Some(lang.into()),
            allow_plain: false,
        }
    }

    pub fn plain(mut self) -> Self {
        self.allow_plain = true;
        self
    }
}

struct RawToken {
    line: usize,
    token: Token,
    pred: String,
    args: Vec<String>,
    plain: bool,
}

#[derive(Default)]
struct Block {
    start: usize,
    sent_id: Option<String>,
    lang: Option<String>,
    comments: Vec<String>,
    tokens: Vec<RawToken>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.sent_id.is_none() && self.lang.is_none() && self.comments.is_empty() && self.tokens.is_empty()
    }

    fn finish(self, opts: &ParseOptions) -> Result<Sentence, CorpusError> {
        let start = self.start;
        if self.tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: start });
        }
        let lang = match self.lang.or_else(|| opts.default_lang.clone()) {
            Some(lang) => lang,
            None => return Err(CorpusError::MissingLanguage { line: start }),
        };

        let predicates: Vec<(usize, String)> = self
            .tokens
            .iter()
            .filter(|t| !t.plain && t.pred != EMPTY)
            .map(|t| (t.token.index, t.pred.clone()))
            .collect();
        let mut frames: Vec<PredicateFrame> = predicates
            .iter()
            .map(|(index, sense)| PredicateFrame::new(*index, sense.clone(), Vec::new()))
            .collect();

        let mut tokens = Vec::with_capacity(self.tokens.len());
        for raw in self.tokens {
            if raw.plain && !predicates.is_empty() {
                return Err(CorpusError::ArgColumns {
                    line: raw.line,
                    predicates: predicates.len(),
                    found: 0,
                });
            }
            if !raw.plain && raw.args.len() != predicates.len() {
                return Err(CorpusError::ArgColumns {
                    line: raw.line,
                    predicates: predicates.len(),
                    found: raw.args.len(),
                });
            }
            for (frame, role) in frames.iter_mut().zip(&raw.args) {
                if role != EMPTY {
                    frame.args.push(Argument::new(raw.token.index, role.clone()));
                }
            }
            tokens.push(raw.token);
        }

        let sentence = Sentence {
            sent_id: self.sent_id.unwrap_or_default(),
            lang,
            comments: self.comments,
            tokens,
            frames,
        };
        if let Some(kind) = sentence.violations().into_iter().next() {
            return Err(CorpusError::Invalid { line: start, kind });
        }
        Ok(sentence)
    }
}

fn parse_token_line(line_no: usize, line: &str, opts: &ParseOptions, expected_index: usize) -> Result<RawToken, CorpusError> {
    let cols: Vec<&str> = line.split('\t').collect();
    let min = if opts.allow_plain { CONLLU_COLUMNS } else { SRL_COLUMNS };
    if cols.len() < min {
        return Err(CorpusError::ColumnCount {
            line: line_no,
            expected: min,
            found: cols.len(),
        });
    }

    let id = cols[0];
    if id.contains(['-', '.']) {
        return Err(CorpusError::UnsupportedId {
            line: line_no,
            id: id.to_string(),
        });
    }
    let index: usize = id.parse().map_err(|_| CorpusError::BadId {
        line: line_no,
        id: id.to_string(),
    })?;
    if index != expected_index {
        return Err(CorpusError::NonContiguous {
            line: line_no,
            expected: expected_index,
            found: index,
        });
    }
    let head = match cols[6] {
        EMPTY => None,
        value => Some(value.parse().map_err(|_| CorpusError::BadHead {
            line: line_no,
            value: value.to_string(),
        })?),
    };

    let token = Token {
        index,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        xpos: cols[4].to_string(),
        feats: cols[5].to_string(),
        head,
        deprel: cols[7].to_string(),
        deps: cols[8].to_string(),
        misc: cols[9].to_string(),
    };
    let plain = cols.len() == CONLLU_COLUMNS;
    let (pred, args) = if plain {
        (EMPTY.to_string(), Vec::new())
    } else {
        (
            cols[10].to_string(),
            cols[11..].iter().map(|s| s.to_string()).collect(),
        )
    };
    Ok(RawToken {
        line: line_no,
        token,
        pred,
        args,
        plain,
    })
}

/// Parses a corpus; frames are rebuilt from the PRED and ARG columns.
pub fn parse_srl_corpus(text: &str, opts: &ParseOptions) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut block = Block::default();

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if block.is_empty() {
            block.start = line_no;
        }

        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(std::mem::take(&mut block).finish(opts)?);
            }
            continue;
        }

        if let Some(comment) = line.strip_prefix('#') {
            match comment.split_once('=') {
                Some((key, value)) if key.trim() == "sent_id" && block.sent_id.is_none() => {
                    block.sent_id = Some(value.trim().to_string());
                }
                Some((key, value)) if key.trim() == "lang" && block.lang.is_none() => {
                    block.lang = Some(value.trim().to_string());
                }
                _ => block.comments.push(line.to_string()),
            }
            continue;
        }

        let expected = block.tokens.len() + 1;
        block.tokens.push(parse_token_line(line_no, line, opts, expected)?);
    }
    if !block.is_empty() {
        sentences.push(block.finish(opts)?);
    }

    Ok(Corpus::new(sentences))
}

/// Canonical serialization: `sent_id`, `lang`, remaining comments, token lines,
/// one blank line after every sentence.
pub fn write_srl_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        write_sentence(&mut out, sentence);
    }
    out
}

fn write_sentence(out: &mut String, sentence: &Sentence) {
    if !sentence.sent_id.is_empty() {
        let _ = writeln!(out, "# sent_id = {}", sentence.sent_id);
    }
    let _ = writeln!(out, "# lang = {}", sentence.lang);
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }

    let mut frames: Vec<&PredicateFrame> = sentence.frames.iter().collect();
    frames.sort_by_key(|f| f.pred_index);

    for token in &sentence.tokens {
        let head = token
            .head
            .map(|h| h.to_string())
            .unwrap_or_else(|| EMPTY.to_string());
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            token.index,
            token.form,
            token.lemma,
            token.upos,
            token.xpos,
            token.feats,
            head,
            token.deprel,
            token.deps,
            token.misc
        );
        let pred = frames
            .iter()
            .find(|f| f.pred_index == token.index)
            .map_or(EMPTY, |f| f.sense.as_str());
        out.push('\t');
        out.push_str(pred);
        for frame in &frames {
            out.push('\t');
            out.push_str(frame.role_of(token.index).unwrap_or(EMPTY));
        }
        out.push('\n');
    }
    out.push('\n');
}

pub fn read_corpus(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_srl_corpus(&text, opts)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<(), CorpusError> {
    std::fs::write(path, write_srl_corpus(corpus))?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub predicates: usize,
    pub arguments: usize,
    pub per_role: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn merge(&mut self, other: &CorpusStats) {
        self.sentences += other.sentences;
        self.predicates += other.predicates;
        self.arguments += other.arguments;
        for (role, count) in &other.per_role {
            *self.per_role.entry(role.clone()).or_default() += count;
        }
    }

    /// `key\tvalue` lines; roles appear as `role.<name>`.
    pub fn to_report(&self) -> String {
        let mut out = format!(
            "sentences\t{}\npredicates\t{}\narguments\t{}\n",
            self.sentences, self.predicates, self.arguments
        );
        for (role, count) in &self.per_role {
            let _ = writeln!(out, "role.{role}\t{count}");
        }
        out
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        sentences: corpus.sentences.len(),
        ..Default::default()
    };
    for frame in corpus.sentences.iter().flat_map(|s| &s.frames) {
        stats.predicates += 1;
        stats.arguments += frame.args.len();
        for arg in &frame.args {
            *stats.per_role.entry(arg.role.clone()).or_default() += 1;
        }
    }
    stats
}
