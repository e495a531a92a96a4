//! Acceptance criteria, one line per criterion. Every oracle here is
//! written independently of the library code it checks.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xsrl::alignment::{ibm1_train, parse_parallel, AlignmentTable, ParallelPair};
use xsrl::corpus::{parse_srl_corpus, read_corpus, Argument, Corpus, ParseOptions, PredicateFrame, Sentence, Token};
use xsrl::eval::{srl_f1, EvalReport};
use xsrl::model::crf::{log_partition, viterbi, CrfScores};
use xsrl::model::pgn::pgn_params;
use xsrl::model::vocab::Vocabs;
use xsrl::model::{train, ModelConfig, SrlModel, TrainingExample, Variant};
use xsrl::postag::{fit_pos_emission, PosDistribution, DEFAULT_SMOOTHING};
use xsrl::projection::{project_corpus, project_sentence, ProjectionConfig, ProjectionStats};
use xsrl::toy;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

fn toy_corpus(name: &str) -> Corpus {
    read_corpus(toy_dir().join(name), &ParseOptions::default().plain()).expect("shipped toy corpus parses")
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    if elapsed > limit {
        Err(format!("took {elapsed:.1?}, limit {limit:?}"))
    } else {
        Ok(elapsed)
    }
}

// ---------------------------------------------------------------- 1

/// Score of a label path with explicit start (k) and end (k+1) transitions.
fn brute_path_score(em: &[f64], tr: &[f64], k: usize, path: &[usize]) -> f64 {
    let w = k + 2;
    let mut s = tr[k * w + path[0]];
    for (i, &y) in path.iter().enumerate() {
        s += em[i * k + y];
        if i > 0 {
            s += tr[path[i - 1] * w + y];
        }
    }
    s + tr[path[path.len() - 1] * w + k + 1]
}

fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn crf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=4);
        let em: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let tr: Vec<f64> = (0..(k + 2) * (k + 2)).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let scores: Vec<(Vec<usize>, f64)> = all_paths(n, k)
            .into_iter()
            .map(|p| {
                let s = brute_path_score(&em, &tr, k, &p);
                (p, s)
            })
            .collect();
        let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        let brute_z = max + scores.iter().map(|(_, s)| (s - max).exp()).sum::<f64>().ln();
        let (best_path, _) = scores
            .iter()
            .fold(None::<&(Vec<usize>, f64)>, |best, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            })
            .unwrap();

        let s = CrfScores::new(&em, &tr, k);
        let z = log_partition(&s);
        worst = worst.max((z - brute_z).abs());
        ensure!((z - brute_z).abs() <= 1e-8, "case {case}: log Z {z} vs brute force {brute_z}");
        let decoded = viterbi(&s);
        ensure!(&decoded == best_path, "case {case}: viterbi {decoded:?} vs brute force {best_path:?}");
    }
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!("500 instances, max |Δ log Z| = {worst:.1e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 2

fn three_token_corpus() -> Corpus {
    let rows = [
        ("en", ["dogs", "chase", "cats"], ["NOUN", "VERB", "NOUN"], 2, [(1, "A0"), (3, "A1")]),
        ("de", ["hunde", "jagen", "katzen"], ["NOUN", "VERB", "NOUN"], 2, [(1, "A0"), (3, "A1")]),
        ("en", ["yesterday", "birds", "sang"], ["ADV", "NOUN", "VERB"], 3, [(1, "AM-TMP"), (2, "A0")]),
    ];
    Corpus::new(
        rows.iter()
            .map(|(lang, forms, tags, pred, args)| {
                let tokens = forms
                    .iter()
                    .zip(tags)
                    .enumerate()
                    .map(|(i, (f, t))| Token::new(i + 1, *f, *t))
                    .collect();
                let args = args.iter().map(|&(i, r)| Argument::new(i, r)).collect();
                Sentence::new(*lang, tokens, vec![PredicateFrame::new(*pred, "p.01", args)])
            })
            .collect(),
    )
}

/// Central-difference check over sampled coordinates of every trainable tensor.
/// Relative error is |a − n| / max(|a|, |n|, 1e-5).
fn finite_difference_check(model: &SrlModel, sentence: &Sentence, per_tensor: usize, rng: &mut ChaCha8Rng) -> Result<(f64, usize, Vec<String>), String> {
    let eps = 1e-5;
    let ex = model
        .encode_example(&TrainingExample::new(sentence, &sentence.frames[0]))
        .map_err(|e| e.to_string())?;
    let mut grads = model.params().zeros_like();
    model.loss_and_grad(&ex, &mut grads, 1.0);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut total = 0;
    let mut names = Vec::new();
    let count = model.params().tensors().len();
    for ti in 0..count {
        let tensor = model.params().tensors()[ti].clone();
        if !tensor.trainable {
            continue;
        }
        // embedding rows outside the example cannot move the loss
        let rows: Option<Vec<usize>> = match tensor.name.as_str() {
            "word_embedding" => Some(ex.words.clone()),
            "pos_embedding" => Some(ex.tags.clone()),
            "predicate_embedding" => Some(vec![0, 1]),
            "language_embedding" => Some(vec![ex.language]),
            _ => None,
        };
        let mut coords: Vec<usize> = match rows {
            Some(rows) => rows
                .iter()
                .flat_map(|r| r * tensor.shape[1]..(r + 1) * tensor.shape[1])
                .collect(),
            None => (0..tensor.data.len()).collect(),
        };
        coords.sort_unstable();
        coords.dedup();
        coords.shuffle(rng);
        coords.truncate(per_tensor);
        for &c in &coords {
            let orig = tensor.data[c];
            probe.params_mut().tensors_mut()[ti].data[c] = orig + eps;
            let plus = probe.loss(&ex);
            probe.params_mut().tensors_mut()[ti].data[c] = orig - eps;
            let minus = probe.loss(&ex);
            probe.params_mut().tensors_mut()[ti].data[c] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensors()[ti].data[c];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5);
            worst = worst.max(rel);
        }
        total += coords.len();
        names.push(tensor.name.clone());
    }
    Ok((worst, total, names))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let corpus = three_token_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for variant in [Variant::Basic, Variant::Pgn] {
        for layers in [1, 3] {
            let config = ModelConfig {
                word_dim: 5,
                pos_dim: 4,
                pred_dim: 3,
                lang_dim: 3,
                hidden: 8,
                layers,
                variant,
                seed: 5,
                ..ModelConfig::default()
            };
            let model = SrlModel::new(config, Vocabs::from_corpus(&corpus), None).map_err(|e| e.to_string())?;
            for sentence in corpus.sentences() {
                let (err, coords, names) = finite_difference_check(&model, sentence, 80, &mut rng)?;
                ensure!(coords >= 200, "{variant:?}/{layers}: only {coords} coordinates");
                let required: &[&str] = match variant {
                    Variant::Basic => &["word_embedding", "pos_embedding", "predicate_embedding", "encoder", "crf_emission", "crf_transition"],
                    Variant::Pgn => &[
                        "word_embedding",
                        "pos_embedding",
                        "predicate_embedding",
                        "language_embedding",
                        "pgn_generator",
                        "crf_emission",
                        "crf_transition",
                    ],
                };
                ensure!(required.iter().all(|r| names.iter().any(|n| n == r)), "{variant:?}: tensors checked {names:?}");
                ensure!(err < 1e-4, "{variant:?}/{layers} layers: max relative error {err:.2e}");
                worst = worst.max(err);
            }
        }
    }
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("max relative error {worst:.2e}, {t:.2?}"))
}

// ---------------------------------------------------------------- 3

fn pgn_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rows = rng.gen_range(1..60);
        let cols = rng.gen_range(1..10);
        let w: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e1: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e2: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mix: Vec<f64> = e1.iter().zip(&e2).map(|(x, y)| a * x + b * y).collect();
        let lhs = pgn_params(&w, &mix).map_err(|e| e.to_string())?;
        let v1 = pgn_params(&w, &e1).map_err(|e| e.to_string())?;
        let v2 = pgn_params(&w, &e2).map_err(|e| e.to_string())?;
        for i in 0..rows {
            worst = worst.max((lhs[i] - (a * v1[i] + b * v2[i])).abs());
        }
    }
    ensure!(worst <= 1e-12, "linearity violated by {worst:.2e}");

    let corpus = Corpus::new(toy_corpus(toy::EN_TRAIN).sentences()[..20].to_vec());
    let base = ModelConfig {
        word_dim: 8,
        pos_dim: 4,
        pred_dim: 4,
        lang_dim: 1,
        hidden: 8,
        layers: 3,
        ..ModelConfig::default()
    };
    let vocabs = Vocabs::from_corpus(&corpus);
    let basic = SrlModel::new(ModelConfig { variant: Variant::Basic, ..base.clone() }, vocabs.clone(), None).map_err(|e| e.to_string())?;
    let mut pgn = SrlModel::new(ModelConfig { variant: Variant::Pgn, ..base }, vocabs, None).map_err(|e| e.to_string())?;
    ensure!(pgn.config().language_count == 1, "expected one language");
    {
        let b = basic.params().clone();
        let p = pgn.params_mut();
        p.word = b.word;
        p.pos = b.pos;
        p.predicate = b.predicate;
        p.emission = b.emission;
        p.transition = b.transition;
        p.encoder.data = b.encoder.data;
        p.language.as_mut().unwrap().data = vec![1.0];
    }
    let mut probes = 0;
    for s in corpus.sentences() {
        let f = &s.frames[0];
        let xb = basic.encode_input(s, f.pred_index).map_err(|e| e.to_string())?;
        let xp = pgn.encode_input(s, f.pred_index).map_err(|e| e.to_string())?;
        let hb: Vec<u64> = basic.encode(&xb).concat().into_iter().map(f64::to_bits).collect();
        let hp: Vec<u64> = pgn.encode(&xp).concat().into_iter().map(f64::to_bits).collect();
        ensure!(hb == hp, "{}: encoder states differ", s.sent_id);
        ensure!(basic.decode(&xb) == pgn.decode(&xp), "{}: decoded labels differ", s.sent_id);
        probes += 1;
    }
    Ok(format!("linearity max error {worst:.1e}; {probes} probe sentences bit-identical"))
}

// ---------------------------------------------------------------- 4

const SRC_WORDS: [&str; 6] = ["s0", "s1", "s2", "s3", "s4", "s5"];
const TGT_WORDS: [&str; 6] = ["t0", "t1", "t2", "t3", "t4", "t5"];
const TAGS: [&str; 4] = ["NOUN", "VERB", "DET", "ADJ"];
const ROLES: [&str; 4] = ["A0", "A1", "A2", "AM-TMP"];

struct OracleTables {
    align: HashMap<(String, String), f64>,
    pos: HashMap<String, Vec<f64>>,
}

impl OracleTables {
    fn align(&self, e: &str, f: &str) -> f64 {
        self.align.get(&(e.to_string(), f.to_string())).copied().unwrap_or(0.0)
    }

    fn pos(&self, f: &str, tag: &str) -> f64 {
        match TAGS.iter().position(|t| *t == tag) {
            None => 0.0,
            Some(i) => self.pos.get(f).map_or(1.0 / TAGS.len() as f64, |row| row[i]),
        }
    }
}

fn random_tables(rng: &mut ChaCha8Rng) -> (OracleTables, AlignmentTable, PosDistribution) {
    let mut oracle = OracleTables {
        align: HashMap::new(),
        pos: HashMap::new(),
    };
    let mut table = AlignmentTable::new(0.0);
    for e in SRC_WORDS {
        let weights: Vec<u32> = TGT_WORDS.iter().map(|_| rng.gen_range(0..4)).collect();
        let total: u32 = weights.iter().sum();
        if total == 0 {
            continue;
        }
        for (f, w) in TGT_WORDS.iter().zip(&weights) {
            if *w > 0 {
                let p = *w as f64 / total as f64;
                table.insert(e, *f, p);
                oracle.align.insert((e.to_string(), f.to_string()), p);
            }
        }
    }
    let mut dist = PosDistribution::new(TAGS.iter().map(|t| t.to_string()).collect());
    for f in TGT_WORDS {
        if !rng.gen_bool(0.8) {
            continue;
        }
        let weights: Vec<u32> = TAGS.iter().map(|_| rng.gen_range(0..3)).collect();
        let total: u32 = weights.iter().sum();
        let row: Vec<f64> = if total == 0 {
            vec![0.25; TAGS.len()]
        } else {
            weights.iter().map(|w| *w as f64 / total as f64).collect()
        };
        dist.insert(f, row.clone());
        oracle.pos.insert(f.to_string(), row);
    }
    (oracle, table, dist)
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Sentence, Sentence) {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=6);
    let src_tokens: Vec<Token> = (1..=n)
        .map(|i| {
            let tag = if rng.gen_bool(0.1) { "PRON" } else { *TAGS.choose(rng).unwrap() };
            Token::new(i, *SRC_WORDS.choose(rng).unwrap(), tag)
        })
        .collect();
    let tgt_tokens: Vec<Token> = (1..=m).map(|i| Token::new(i, *TGT_WORDS.choose(rng).unwrap(), "X")).collect();
    let mut preds: Vec<usize> = (1..=n).collect();
    preds.shuffle(rng);
    let frames = preds
        .into_iter()
        .take(rng.gen_range(0..=2))
        .map(|p| {
            let mut args = Vec::new();
            for i in (1..=n).filter(|&i| i != p) {
                if rng.gen_bool(0.5) {
                    args.push(Argument::new(i, *ROLES.choose(rng).unwrap()));
                }
            }
            PredicateFrame::new(p, format!("v{p}.01"), args)
        })
        .collect();
    (Sentence::new("src", src_tokens, frames), Sentence::new("tgt", tgt_tokens, Vec::new()))
}

type OracleFrame = (usize, String, Vec<(usize, String)>);

/// Direct reading of the projection rules, checking every candidate
/// against every other one instead of grouping.
fn oracle_project(src: &Sentence, tgt: &Sentence, t: &OracleTables, alpha: f64) -> (Vec<OracleFrame>, [usize; 8]) {
    struct Cand {
        frame: usize,
        is_pred: bool,
        src: usize,
        tgt: usize,
        label: String,
        score: f64,
    }
    let mut cands = Vec::new();
    for (fi, f) in src.frames.iter().enumerate() {
        let words = std::iter::once((f.pred_index, true, f.sense.clone())).chain(f.args.iter().map(|a| (a.index, false, a.role.clone())));
        for (i, is_pred, label) in words {
            let e = &src.tokens[i - 1];
            let mut best = 1;
            for j in 2..=tgt.len() {
                if t.align(&e.form, &tgt.tokens[j - 1].form) > t.align(&e.form, &tgt.tokens[best - 1].form) {
                    best = j;
                }
            }
            let f_word = &tgt.tokens[best - 1].form;
            let score = t.align(&e.form, f_word) * t.pos(f_word, &e.upos);
            cands.push(Cand {
                frame: fi,
                is_pred,
                src: i,
                tgt: best,
                label,
                score,
            });
        }
    }
    let beats = |a: &Cand, b: &Cand| a.score > b.score || (a.score == b.score && a.src < b.src);

    let pred_survives: Vec<bool> = cands
        .iter()
        .map(|c| c.is_pred && !cands.iter().any(|o| o.is_pred && o.tgt == c.tgt && o.src != c.src && beats(o, c)))
        .collect();
    let frame_alive = |fi: usize| cands.iter().zip(&pred_survives).any(|(c, &s)| c.is_pred && c.frame == fi && s);
    let survives: Vec<bool> = cands
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            if c.is_pred {
                return pred_survives[ci];
            }
            if !frame_alive(c.frame) {
                return false;
            }
            // a target word held by a surviving predicate rejects every other source word
            let blocked_by_pred = |a: &Cand| {
                cands
                    .iter()
                    .zip(&pred_survives)
                    .any(|(o, &s)| s && o.tgt == a.tgt && o.src != a.src)
            };
            let blocked_by_arg = cands.iter().any(|o| {
                !o.is_pred && frame_alive(o.frame) && !blocked_by_pred(o) && o.tgt == c.tgt && o.src != c.src && beats(o, c)
            });
            !blocked_by_pred(c) && !blocked_by_arg
        })
        .collect();

    let mut stats = [0usize; 8];
    stats[0] = src.frames.len();
    stats[4] = src.frames.iter().map(|f| f.args.len()).sum();
    let mut frames: BTreeMap<usize, OracleFrame> = BTreeMap::new();
    for (c, &s) in cands.iter().zip(&survives) {
        if !c.is_pred {
            continue;
        }
        if !s {
            stats[3] += 1;
        } else if c.score < alpha {
            stats[2] += 1;
        } else {
            stats[1] += 1;
            frames.insert(c.frame, (c.tgt, c.label.clone(), Vec::new()));
        }
    }
    for (c, &s) in cands.iter().zip(&survives) {
        if c.is_pred {
            continue;
        }
        if !s {
            stats[7] += 1;
        } else if c.score < alpha || !frames.contains_key(&c.frame) {
            stats[6] += 1;
        } else {
            stats[5] += 1;
            frames.get_mut(&c.frame).unwrap().2.push((c.tgt, c.label.clone()));
        }
    }
    let mut out: Vec<OracleFrame> = frames.into_values().collect();
    for f in &mut out {
        f.2.sort();
    }
    out.sort_by_key(|f| f.0);
    (out, stats)
}

fn frames_of(s: &Sentence) -> Vec<OracleFrame> {
    s.frames
        .iter()
        .map(|f| {
            let mut args: Vec<(usize, String)> = f.args.iter().map(|a| (a.index, a.role.clone())).collect();
            args.sort();
            (f.pred_index, f.sense.clone(), args)
        })
        .collect()
}

fn fixed_scenario(src: &[(&str, &str)], tgt: &[&str], frame: PredicateFrame, align: &[(&str, &str, f64)]) -> Sentence {
    let src = Sentence::new(
        "src",
        src.iter().enumerate().map(|(i, (w, t))| Token::new(i + 1, *w, *t)).collect(),
        vec![frame],
    );
    let tgt = Sentence::new("tgt", tgt.iter().enumerate().map(|(i, w)| Token::new(i + 1, *w, "X")).collect(), vec![]);
    let mut table = AlignmentTable::new(0.0);
    for &(e, f, p) in align {
        table.insert(e, f, p);
    }
    let dist = PosDistribution::new(TAGS.iter().map(|t| t.to_string()).collect());
    let config = ProjectionConfig::with_alpha(0.0).unwrap();
    project_sentence(&src, &tgt, &table, &dist, &config).unwrap().sentence
}

fn projection_oracle() -> Outcome {
    // one-to-one: everything is carried over
    let s = fixed_scenario(
        &[("he", "NOUN"), ("eats", "VERB"), ("apples", "NOUN")],
        &["er", "isst", "äpfel"],
        PredicateFrame::new(2, "eat.01", vec![Argument::new(1, "A0"), Argument::new(3, "A1")]),
        &[("he", "er", 1.0), ("eats", "isst", 1.0), ("apples", "äpfel", 1.0)],
    );
    ensure!(
        frames_of(&s) == vec![(2, "eat.01".to_string(), vec![(1, "A0".to_string()), (3, "A1".to_string())])],
        "one-to-one scenario gave {:?}",
        frames_of(&s)
    );
    // predicate and argument on one word: the predicate stays even with the lower score
    let s = fixed_scenario(
        &[("he", "NOUN"), ("takes", "VERB"), ("shower", "NOUN")],
        &["er", "duscht"],
        PredicateFrame::new(2, "take.01", vec![Argument::new(1, "A0"), Argument::new(3, "A1")]),
        &[("he", "er", 1.0), ("takes", "duscht", 0.6), ("takes", "er", 0.4), ("shower", "duscht", 1.0)],
    );
    ensure!(
        frames_of(&s) == vec![(2, "take.01".to_string(), vec![(1, "A0".to_string())])],
        "predicate-argument scenario gave {:?}",
        frames_of(&s)
    );
    // two arguments on one word: the more confident one stays
    let s = fixed_scenario(
        &[("she", "NOUN"), ("gives", "VERB"), ("him", "NOUN"), ("it", "NOUN")],
        &["sie", "gibt", "es", "ihm"],
        PredicateFrame::new(2, "give.01", vec![Argument::new(1, "A0"), Argument::new(3, "A2"), Argument::new(4, "A1")]),
        &[("she", "sie", 1.0), ("gives", "gibt", 1.0), ("him", "ihm", 0.4), ("him", "es", 0.6), ("it", "es", 0.9), ("it", "ihm", 0.1)],
    );
    ensure!(
        frames_of(&s) == vec![(2, "give.01".to_string(), vec![(1, "A0".to_string()), (3, "A1".to_string())])],
        "argument-argument scenario gave {:?}",
        frames_of(&s)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphas = [0.0, 0.05, 0.1, 0.25, 0.4, 0.5, 1.0];
    let mut collisions = 0;
    let mut kept = 0;
    for case in 0..1000 {
        let (oracle, table, dist) = random_tables(&mut rng);
        let (src, tgt) = random_pair(&mut rng);
        let alpha = *alphas.choose(&mut rng).unwrap();
        let config = ProjectionConfig::with_alpha(alpha).unwrap();
        let got = project_sentence(&src, &tgt, &table, &dist, &config).map_err(|e| e.to_string())?;
        let (want, want_stats) = oracle_project(&src, &tgt, &oracle, alpha);
        ensure!(frames_of(&got.sentence) == want, "case {case}: frames {:?}, oracle {want:?}", frames_of(&got.sentence));
        ensure!(got.stats.values() == want_stats, "case {case}: stats {:?}, oracle {want_stats:?}", got.stats.values());
        collisions += want_stats[3] + want_stats[7];
        kept += want_stats[1];
    }
    Ok(format!("3 fixed scenarios; 1000 random sentences, {kept} frames kept, {collisions} collision drops"))
}

// ---------------------------------------------------------------- 5, 6

fn toy_bitext() -> Vec<ParallelPair> {
    let text = std::fs::read_to_string(toy_dir().join(toy::BITEXT)).unwrap();
    parse_parallel(&text, false).unwrap()
}

fn threshold_monotonicity() -> Outcome {
    let table = ibm1_train(&toy_bitext(), 10, 0.0).map_err(|e| e.to_string())?.table;
    let translations = toy_corpus(toy::DE_TRANSLATIONS);
    let dist = fit_pos_emission(&translations, DEFAULT_SMOOTHING).map_err(|e| e.to_string())?;
    let source = toy_corpus(toy::EN_TRAIN);
    let mut previous: Option<ProjectionStats> = None;
    let mut row = Vec::new();
    for alpha in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let config = ProjectionConfig::with_alpha(alpha).unwrap();
        let (_, stats) = project_corpus(&source, translations.sentences(), &table, &dist, &config).map_err(|e| e.to_string())?;
        if alpha == 0.0 {
            ensure!(
                stats.frames_kept == stats.frames_in - stats.frames_dropped_collision,
                "alpha 0 kept {} of {} collision survivors",
                stats.frames_kept,
                stats.frames_in - stats.frames_dropped_collision
            );
        }
        if let Some(p) = previous {
            ensure!(stats.frames_kept <= p.frames_kept, "frames_kept rose at alpha {alpha}");
            ensure!(stats.args_kept <= p.args_kept, "args_kept rose at alpha {alpha}");
        }
        row.push(format!("{}/{}", stats.frames_kept, stats.args_kept));
        previous = Some(stats);
    }
    Ok(format!("frames/args kept over alpha 0..1: {}", row.join(" ")))
}

fn ibm_model_1() -> Outcome {
    let model = ibm1_train(&toy_bitext(), 10, 0.0).map_err(|e| e.to_string())?;
    let ll = &model.log_likelihoods;
    ensure!(ll.len() == 10, "{} log-likelihood values", ll.len());
    for w in ll.windows(2) {
        ensure!(w[1] >= w[0] - 1e-9, "log-likelihood fell from {} to {}", w[0], w[1]);
    }
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (e, _, p) in model.table.entries() {
        *sums.entry(e).or_default() += p;
    }
    let worst = sums.values().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    ensure!(worst <= 1e-9, "a source distribution is off by {worst:.2e}");

    let single = ibm1_train(&[ParallelPair::from_text("a", "x")], 10, 0.0).map_err(|e| e.to_string())?;
    let p = single.table.align_prob("a", "x");
    ensure!((p - 1.0).abs() <= 1e-12, "degenerate corpus gives a(x|a) = {p}");
    Ok(format!("LL {:.2} → {:.2}, {} source words normalized within {worst:.1e}", ll[0], ll[9], sums.len()))
}

// ---------------------------------------------------------------- 7, 8

/// Token-level labels for one frame, "O" outside arguments.
fn token_labels(s: &Sentence, f: &PredicateFrame) -> Vec<String> {
    (1..=s.len())
        .map(|i| f.args.iter().find(|a| a.index == i).map_or("O".to_string(), |a| a.role.clone()))
        .collect()
}

fn token_f1(gold: &Corpus, model: &SrlModel) -> Result<f64, String> {
    let (mut correct, mut predicted, mut total) = (0usize, 0usize, 0usize);
    for s in gold.sentences() {
        for f in &s.frames {
            let p = model.predict(s, f.pred_index).map_err(|e| e.to_string())?;
            for (g, y) in token_labels(s, f).iter().zip(token_labels(s, &p)) {
                total += usize::from(g != "O");
                predicted += usize::from(y != "O");
                correct += usize::from(g != "O" && *g == y);
            }
        }
    }
    let p = correct as f64 / predicted.max(1) as f64;
    let r = correct as f64 / total.max(1) as f64;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let corpus = toy_corpus(toy::EN_TRAIN);
    ensure!(corpus.len() == 50, "toy corpus has {} sentences", corpus.len());
    let config = ModelConfig {
        word_dim: 32,
        hidden: 64,
        variant: Variant::Basic,
        epochs: 200,
        learning_rate: 0.005,
        batch_size: 10,
        seed: 7,
        ..ModelConfig::default()
    };
    let (model, report) = train(&corpus, config.clone(), None).map_err(|e| e.to_string())?;
    let f1 = token_f1(&corpus, &model)?;
    let elapsed = within(start, Duration::from_secs(300))?;
    ensure!(f1 >= 0.99, "training token F1 {f1}");
    let (again, report2) = train(&corpus, config, None).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&report.epoch_losses) == bits(&report2.epoch_losses), "loss curves differ between runs");
    ensure!(model == again, "parameters differ between runs");
    Ok(format!("token F1 {f1:.4}, final loss {:.2e}, {elapsed:.1?} per run", report.epoch_losses[199]))
}

fn directional_pgn() -> Outcome {
    let train_corpus = toy_corpus(toy::MIX_TRAIN);
    let dev = toy_corpus(toy::MIX_DEV);
    let mut means = Vec::new();
    for variant in [Variant::Basic, Variant::Pgn] {
        let mut scores = Vec::new();
        for seed in 1..=5 {
            let config = ModelConfig {
                word_dim: 16,
                pos_dim: 8,
                pred_dim: 8,
                lang_dim: 8,
                hidden: 16,
                layers: 1,
                variant,
                epochs: 40,
                learning_rate: 0.01,
                batch_size: 10,
                seed,
                ..ModelConfig::default()
            };
            let (model, _) = train(&train_corpus, config, None).map_err(|e| e.to_string())?;
            let pred = model.predict_corpus(&dev).map_err(|e| e.to_string())?;
            scores.push(srl_f1(&dev, &pred).map_err(|e| e.to_string())?.f1);
        }
        means.push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    ensure!(means[1] >= means[0], "PGN mean dev F1 {:.4} < BASIC {:.4}", means[1], means[0]);
    Ok(format!("mean dev F1 over 5 seeds: BASIC {:.4}, PGN {:.4}", means[0], means[1]))
}

// ---------------------------------------------------------------- 9

fn random_eval_pair(rng: &mut ChaCha8Rng) -> (Corpus, Corpus) {
    let roles = ["A0", "A1", "A2", "AM-TMP", "AM-LOC"];
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..rng.gen_range(1..6) {
        let n = rng.gen_range(2..=12);
        let tokens: Vec<Token> = (1..=n).map(|i| Token::new(i, format!("w{i}"), "NOUN")).collect();
        let mut preds: Vec<usize> = (1..=n).collect();
        preds.shuffle(rng);
        preds.truncate(rng.gen_range(0..=3));
        let mut gf = Vec::new();
        let mut pf = Vec::new();
        for &p in &preds {
            let mut ga = Vec::new();
            let mut pa = Vec::new();
            for i in (1..=n).filter(|&i| i != p) {
                if rng.gen_bool(0.4) {
                    let role = *roles.choose(rng).unwrap();
                    ga.push(Argument::new(i, role));
                    if rng.gen_bool(0.7) {
                        let r = if rng.gen_bool(0.2) { *roles.choose(rng).unwrap() } else { role };
                        pa.push(Argument::new(i, r));
                    }
                } else if rng.gen_bool(0.15) {
                    pa.push(Argument::new(i, *roles.choose(rng).unwrap()));
                }
            }
            gf.push(PredicateFrame::new(p, "p.01", ga));
            pf.push(PredicateFrame::new(p, "p.01", pa));
        }
        gold.push(Sentence::new("en", tokens.clone(), gf));
        pred.push(Sentence::new("en", tokens, pf));
    }
    (Corpus::new(gold), Corpus::new(pred))
}

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pooled = (0, 0, 0);
    for case in 0..200 {
        let (gold, pred) = random_eval_pair(&mut rng);
        let (mut correct, mut predicted, mut total) = (0usize, 0usize, 0usize);
        for (gs, ps) in gold.sentences().iter().zip(pred.sentences()) {
            for gf in &gs.frames {
                let pf = ps.frames.iter().find(|f| f.pred_index == gf.pred_index).unwrap();
                total += gf.args.len();
                predicted += pf.args.len();
                for a in &pf.args {
                    if gf.args.iter().any(|g| g.index == a.index && g.role == a.role) {
                        correct += 1;
                    }
                }
            }
        }
        let p = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let r = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };

        let report = srl_f1(&gold, &pred).map_err(|e| e.to_string())?;
        ensure!(
            (report.counts.correct, report.counts.predicted, report.counts.gold) == (correct, predicted, total),
            "case {case}: counts {:?} vs oracle {:?}",
            report.counts,
            (correct, predicted, total)
        );
        ensure!(
            report.precision.to_bits() == p.to_bits() && report.recall.to_bits() == r.to_bits() && report.f1.to_bits() == f.to_bits(),
            "case {case}: P/R/F1 ({}, {}, {}) vs oracle ({p}, {r}, {f})",
            report.precision,
            report.recall,
            report.f1
        );
        let role_support: usize = report.per_role.values().map(|s| s.support).sum();
        let bucket_support: usize = report.per_distance.iter().map(|(_, s)| s.support).sum();
        ensure!(role_support == total, "case {case}: role supports sum to {role_support}, gold has {total}");
        ensure!(bucket_support == total, "case {case}: bucket supports sum to {bucket_support}, gold has {total}");
        pooled = (pooled.0 + correct, pooled.1 + predicted, pooled.2 + total);
    }
    Ok(format!("200 random pairs exact; pooled correct/predicted/gold = {}/{}/{}", pooled.0, pooled.1, pooled.2))
}

// ---------------------------------------------------------------- 10

fn xsrl(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xsrl"))
        .args(args)
        .current_dir(dir)
        .env_remove("XSRL_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("xsrl {} exited with {}: {}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

const PIPELINE_OUTPUTS: [&str; 8] = [
    "table.tsv",
    "pos.tsv",
    "projected.conllu",
    "projected.stats",
    "model.bin",
    "model.log",
    "pred.conllu",
    "eval.tsv",
];

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let data = toy_dir();
    let d = |name: &str| data.join(name).to_string_lossy().into_owned();
    xsrl(&["align-train", "--parallel", &d(toy::BITEXT), "--iterations", "10", "--out", "table.tsv"], dir)?;
    xsrl(&["fit-pos", "--tagged", &d(toy::DE_TRANSLATIONS), "--out", "pos.tsv"], dir)?;
    xsrl(
        &[
            "project",
            "--source",
            &d(toy::EN_TRAIN),
            "--translations",
            &d(toy::DE_TRANSLATIONS),
            "--table",
            "table.tsv",
            "--pos",
            "pos.tsv",
            "--out",
            "projected.conllu",
            "--stats",
            "projected.stats",
        ],
        dir,
    )?;
    xsrl(
        &[
            "train",
            "--train-file",
            "projected.conllu",
            "--variant",
            "pgn",
            "--word-dim",
            "32",
            "--pos-dim",
            "16",
            "--pred-dim",
            "16",
            "--lang-dim",
            "8",
            "--hidden",
            "32",
            "--layers",
            "2",
            "--lr",
            "0.005",
            "--batch-size",
            "10",
            "--epochs",
            "60",
            "--seed",
            "7",
            "--log-file",
            "model.log",
            "--out",
            "model.bin",
        ],
        dir,
    )?;
    xsrl(&["predict", "--model", "model.bin", "--input", &d(toy::DE_DEV), "--out", "pred.conllu"], dir)?;
    xsrl(&["eval", "--gold", &d(toy::DE_DEV), "--pred", "pred.conllu", "--out", "eval.tsv"], dir)?;
    Ok(())
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(first.path())?;
    run_pipeline(second.path())?;
    let elapsed = within(start, Duration::from_secs(600))?;

    let read = |dir: &Path, name: &str| std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"));
    for name in PIPELINE_OUTPUTS {
        ensure!(read(first.path(), name)? == read(second.path(), name)?, "{name} differs between runs");
    }
    let projected = String::from_utf8(read(first.path(), "projected.conllu")?).map_err(|e| e.to_string())?;
    let corpus = parse_srl_corpus(&projected, &ParseOptions::default()).map_err(|e| e.to_string())?;
    let stats = String::from_utf8(read(first.path(), "projected.stats")?).map_err(|e| e.to_string())?;
    let keys: Vec<&str> = stats.lines().filter_map(|l| l.split('\t').next()).collect();
    ensure!(keys == ProjectionStats::KEYS, "stats keys {keys:?}");
    let kept: usize = stats
        .lines()
        .find_map(|l| l.strip_prefix("frames_kept\t"))
        .and_then(|v| v.parse().ok())
        .ok_or("frames_kept missing")?;
    ensure!(kept == corpus.frame_count(), "frames_kept {kept} but corpus has {} frames", corpus.frame_count());
    let report = EvalReport::from_text(&String::from_utf8_lossy(&read(first.path(), "eval.tsv")?)).map_err(|e| e.to_string())?;
    ensure!((0.0..=1.0).contains(&report.f1), "F1 {} out of range", report.f1);
    Ok(format!(
        "{} projected frames, dev F1 {:.4}, outputs byte-identical across runs, {elapsed:.1?} for both",
        kept, report.f1
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("CRF oracle equivalence", crf_oracle),
        ("gradient check", gradient_check),
        ("PGN algebra", pgn_algebra),
        ("projection oracle", projection_oracle),
        ("threshold monotonicity", threshold_monotonicity),
        ("IBM Model 1", ibm_model_1),
        ("overfit sanity", overfit),
        ("directional PGN check", directional_pgn),
        ("metric correctness", metric_correctness),
        ("end-to-end pipeline", end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        ran += 1;
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
