//! Deterministic toy data: a small English corpus with gold frames, its
//! word-by-word pseudo-German translation, a German dev set, a bitext for
//! alignment training, and a two-language corpus whose role assignment
//! depends on the language.
//!
//! The German side reorders some constructions (verb-second after a fronted
//! time adverb, infinitive at the end), drops "to", and translates
//! "takes a shower" as the single verb "duscht", so that projection sees
//! reordering, unaligned words and a predicate/argument collision.

use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_srl_corpus, Argument, Corpus, PredicateFrame, Sentence, Token};

pub const DEFAULT_SEED: u64 = 42;
pub const TRAIN_SENTENCES: usize = 50;
pub const DEV_SENTENCES: usize = 20;
pub const BITEXT_PAIRS: usize = 200;
pub const MIX_TRAIN_PER_LANG: usize = 40;
pub const MIX_DEV_PER_LANG: usize = 20;

pub const EN_TRAIN: &str = "en.train.conllu";
pub const DE_TRANSLATIONS: &str = "de.translations.conllu";
pub const DE_DEV: &str = "de.dev.conllu";
pub const BITEXT: &str = "bitext.txt";
pub const MIX_TRAIN: &str = "mix.train.conllu";
pub const MIX_DEV: &str = "mix.dev.conllu";

/// Languages of the mixed corpus: subject-first and object-first role order
/// over identical surface strings.
pub const MIX_LANGS: [&str; 2] = ["xa", "xb"];

const AGENTS: [(&str, &str); 8] = [
    ("man", "mann"),
    ("woman", "frau"),
    ("child", "kind"),
    ("teacher", "lehrer"),
    ("doctor", "arzt"),
    ("farmer", "bauer"),
    ("dog", "hund"),
    ("cat", "katze"),
];

const THINGS: [(&str, &str); 8] = [
    ("book", "buch"),
    ("apple", "apfel"),
    ("ball", "ball"),
    ("letter", "brief"),
    ("car", "auto"),
    ("bread", "brot"),
    ("dog", "hund"),
    ("cat", "katze"),
];

/// English 3sg, English base, German 3sg, German infinitive.
const VERBS: [(&str, &str, &str, &str); 6] = [
    ("sees", "see", "sieht", "sehen"),
    ("buys", "buy", "kauft", "kaufen"),
    ("reads", "read", "liest", "lesen"),
    ("eats", "eat", "isst", "essen"),
    ("finds", "find", "findet", "finden"),
    ("washes", "wash", "wäscht", "waschen"),
];

const TIMES: [(&str, &str); 3] = [("yesterday", "gestern"), ("today", "heute"), ("tomorrow", "morgen")];

const PLACES: [(&str, &str); 3] = [("garden", "garten"), ("park", "park"), ("kitchen", "küche")];

/// (form, lemma, upos)
type Word<'a> = (&'a str, &'a str, &'a str);

fn tokens(words: &[Word<'_>]) -> Vec<Token> {
    words
        .iter()
        .enumerate()
        .map(|(i, &(form, lemma, upos))| {
            let mut t = Token::new(i + 1, form, upos);
            t.lemma = lemma.to_string();
            t
        })
        .collect()
}

fn frame(pred: usize, sense: &str, args: &[(usize, &str)]) -> PredicateFrame {
    PredicateFrame::new(pred, sense, args.iter().map(|&(i, r)| Argument::new(i, r)).collect())
}

/// One English sentence and its German translation, both annotated.
struct Pair {
    en: Sentence,
    de: Sentence,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty lexicon")
}

fn sense(lemma: &str) -> String {
    format!("{lemma}.01")
}

fn sample_pair(rng: &mut ChaCha8Rng) -> Pair {
    let roll = rng.gen_range(0..20);
    let (n1e, n1d) = *pick(rng, &AGENTS);
    match roll {
        // transitive
        0..=5 => {
            let (n2e, n2d) = *pick(rng, &THINGS);
            let (ve, vb, vd, vi) = *pick(rng, &VERBS);
            let s = sense(vb);
            let args = [(2, "A0"), (5, "A1")];
            Pair {
                en: Sentence::new(
                    "en",
                    tokens(&[("the", "the", "DET"), (n1e, n1e, "NOUN"), (ve, vb, "VERB"), ("the", "the", "DET"), (n2e, n2e, "NOUN")]),
                    vec![frame(3, &s, &args)],
                ),
                de: Sentence::new(
                    "de",
                    tokens(&[("der", "der", "DET"), (n1d, n1d, "NOUN"), (vd, vi, "VERB"), ("den", "der", "DET"), (n2d, n2d, "NOUN")]),
                    vec![frame(3, &s, &args)],
                ),
            }
        }
        // transitive with a time adverb, fronted in German
        6..=9 => {
            let (n2e, n2d) = *pick(rng, &THINGS);
            let (ve, vb, vd, vi) = *pick(rng, &VERBS);
            let (te, td) = *pick(rng, &TIMES);
            let s = sense(vb);
            Pair {
                en: Sentence::new(
                    "en",
                    tokens(&[
                        ("the", "the", "DET"),
                        (n1e, n1e, "NOUN"),
                        (ve, vb, "VERB"),
                        ("the", "the", "DET"),
                        (n2e, n2e, "NOUN"),
                        (te, te, "ADV"),
                    ]),
                    vec![frame(3, &s, &[(2, "A0"), (5, "A1"), (6, "AM-TMP")])],
                ),
                de: Sentence::new(
                    "de",
                    tokens(&[
                        (td, td, "ADV"),
                        (vd, vi, "VERB"),
                        ("der", "der", "DET"),
                        (n1d, n1d, "NOUN"),
                        ("den", "der", "DET"),
                        (n2d, n2d, "NOUN"),
                    ]),
                    vec![frame(2, &s, &[(1, "AM-TMP"), (4, "A0"), (6, "A1")])],
                ),
            }
        }
        // ditransitive
        10..=12 => {
            let (n2e, n2d) = *pick(rng, &AGENTS);
            let (n3e, n3d) = *pick(rng, &THINGS);
            let args = [(2, "A0"), (5, "A2"), (7, "A1")];
            Pair {
                en: Sentence::new(
                    "en",
                    tokens(&[
                        ("the", "the", "DET"),
                        (n1e, n1e, "NOUN"),
                        ("gives", "give", "VERB"),
                        ("the", "the", "DET"),
                        (n2e, n2e, "NOUN"),
                        ("a", "a", "DET"),
                        (n3e, n3e, "NOUN"),
                    ]),
                    vec![frame(3, "give.01", &args)],
                ),
                de: Sentence::new(
                    "de",
                    tokens(&[
                        ("der", "der", "DET"),
                        (n1d, n1d, "NOUN"),
                        ("gibt", "geben", "VERB"),
                        ("dem", "der", "DET"),
                        (n2d, n2d, "NOUN"),
                        ("ein", "ein", "DET"),
                        (n3d, n3d, "NOUN"),
                    ]),
                    vec![frame(3, "give.01", &args)],
                ),
            }
        }
        // control verb: two predicates, German infinitive at the end
        13..=15 => {
            let (n2e, n2d) = *pick(rng, &THINGS);
            let (_, vb, _, vi) = *pick(rng, &VERBS);
            let s = sense(vb);
            Pair {
                en: Sentence::new(
                    "en",
                    tokens(&[
                        ("the", "the", "DET"),
                        (n1e, n1e, "NOUN"),
                        ("wants", "want", "VERB"),
                        ("to", "to", "PART"),
                        (vb, vb, "VERB"),
                        ("the", "the", "DET"),
                        (n2e, n2e, "NOUN"),
                    ]),
                    vec![frame(3, "want.01", &[(2, "A0"), (5, "A1")]), frame(5, &s, &[(2, "A0"), (7, "A1")])],
                ),
                de: Sentence::new(
                    "de",
                    tokens(&[
                        ("der", "der", "DET"),
                        (n1d, n1d, "NOUN"),
                        ("will", "wollen", "VERB"),
                        ("den", "der", "DET"),
                        (n2d, n2d, "NOUN"),
                        (vi, vi, "VERB"),
                    ]),
                    vec![frame(3, "want.01", &[(2, "A0"), (6, "A1")]), frame(6, &s, &[(2, "A0"), (5, "A1")])],
                ),
            }
        }
        // "takes a shower" is one German verb
        16..=17 => Pair {
            en: Sentence::new(
                "en",
                tokens(&[
                    ("the", "the", "DET"),
                    (n1e, n1e, "NOUN"),
                    ("takes", "take", "VERB"),
                    ("a", "a", "DET"),
                    ("shower", "shower", "NOUN"),
                ]),
                vec![frame(3, "take.01", &[(2, "A0"), (5, "A1")])],
            ),
            de: Sentence::new(
                "de",
                tokens(&[("der", "der", "DET"), (n1d, n1d, "NOUN"), ("duscht", "duschen", "VERB")]),
                vec![frame(3, "take.01", &[(2, "A0")])],
            ),
        },
        // location
        _ => {
            let (pe, pd) = *pick(rng, &PLACES);
            Pair {
                en: Sentence::new(
                    "en",
                    tokens(&[
                        ("the", "the", "DET"),
                        (n1e, n1e, "NOUN"),
                        ("sleeps", "sleep", "VERB"),
                        ("in", "in", "ADP"),
                        ("the", "the", "DET"),
                        (pe, pe, "NOUN"),
                    ]),
                    vec![frame(3, "sleep.01", &[(2, "A0"), (6, "AM-LOC")])],
                ),
                de: Sentence::new(
                    "de",
                    tokens(&[
                        ("der", "der", "DET"),
                        (n1d, n1d, "NOUN"),
                        ("schläft", "schlafen", "VERB"),
                        ("im", "in", "ADP"),
                        (pd, pd, "NOUN"),
                    ]),
                    vec![frame(3, "sleep.01", &[(2, "A0"), (5, "AM-LOC")])],
                ),
            }
        }
    }
}

/// Same surface in both languages; `xb` swaps A0 and A1.
fn sample_mixed(rng: &mut ChaCha8Rng, lang: &str) -> Sentence {
    let (n1, _) = *pick(rng, &AGENTS);
    let (n2, _) = *pick(rng, &THINGS);
    let (v, vb, _, _) = *pick(rng, &VERBS);
    let (first, second) = if lang == MIX_LANGS[0] { ("A0", "A1") } else { ("A1", "A0") };
    let mut words: Vec<Word<'_>> = vec![("the", "the", "DET"), (n1, n1, "NOUN"), (v, vb, "VERB"), ("the", "the", "DET"), (n2, n2, "NOUN")];
    let mut args = vec![(2, first), (5, second)];
    if rng.gen_bool(0.3) {
        let (t, _) = *pick(rng, &TIMES);
        words.push((t, t, "ADV"));
        args.push((6, "AM-TMP"));
    }
    Sentence::new(lang, tokens(&words), vec![frame(3, &sense(vb), &args)])
}

fn with_ids(mut sentences: Vec<Sentence>, prefix: &str) -> Corpus {
    for (i, s) in sentences.iter_mut().enumerate() {
        s.sent_id = format!("{prefix}-{:03}", i + 1);
    }
    Corpus::new(sentences)
}

fn surface(s: &Sentence) -> String {
    s.tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub en_train: Corpus,
    /// German translations of `en_train`, tagged but without frames.
    pub de_translations: Corpus,
    pub de_dev: Corpus,
    /// (English, German) sentence pairs; the first ones are the training pairs.
    pub bitext: Vec<(String, String)>,
    pub mix_train: Corpus,
    pub mix_dev: Corpus,
}

pub fn generate(seed: u64) -> ToyData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train: Vec<Pair> = (0..TRAIN_SENTENCES).map(|_| sample_pair(&mut rng)).collect();
    let dev: Vec<Pair> = (0..DEV_SENTENCES).map(|_| sample_pair(&mut rng)).collect();
    let extra: Vec<Pair> = (0..BITEXT_PAIRS - TRAIN_SENTENCES).map(|_| sample_pair(&mut rng)).collect();

    let bitext = train
        .iter()
        .chain(&extra)
        .map(|p| (surface(&p.en), surface(&p.de)))
        .collect();
    let en_train = with_ids(train.iter().map(|p| p.en.clone()).collect(), "en-train");
    let de_translations = with_ids(
        train
            .iter()
            .map(|p| {
                let mut s = p.de.clone();
                s.frames.clear();
                s
            })
            .collect(),
        "de-train",
    );
    let de_dev = with_ids(dev.into_iter().map(|p| p.de).collect(), "de-dev");

    let mut mixed = |count: usize, prefix: &str| {
        let sentences = (0..count)
            .flat_map(|_| MIX_LANGS.map(|l| l.to_string()))
            .map(|lang| sample_mixed(&mut rng, &lang))
            .collect();
        with_ids(sentences, prefix)
    };
    let mix_train = mixed(MIX_TRAIN_PER_LANG, "mix-train");
    let mix_dev = mixed(MIX_DEV_PER_LANG, "mix-dev");

    ToyData {
        en_train,
        de_translations,
        de_dev,
        bitext,
        mix_train,
        mix_dev,
    }
}

impl ToyData {
    /// `(file name, contents)` for every toy file.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let bitext: String = self.bitext.iter().map(|(e, d)| format!("{e} ||| {d}\n")).collect();
        vec![
            (EN_TRAIN, write_srl_corpus(&self.en_train)),
            (DE_TRANSLATIONS, write_srl_corpus(&self.de_translations)),
            (DE_DEV, write_srl_corpus(&self.de_dev)),
            (BITEXT, bitext),
            (MIX_TRAIN, write_srl_corpus(&self.mix_train)),
            (MIX_DEV, write_srl_corpus(&self.mix_dev)),
        ]
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.files() {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate;

    #[test]
    fn sizes_and_validity() {
        let toy = generate(DEFAULT_SEED);
        assert_eq!(toy.en_train.len(), TRAIN_SENTENCES);
        assert_eq!(toy.de_translations.len(), TRAIN_SENTENCES);
        assert_eq!(toy.de_dev.len(), DEV_SENTENCES);
        assert_eq!(toy.bitext.len(), BITEXT_PAIRS);
        assert_eq!(toy.mix_train.len(), 2 * MIX_TRAIN_PER_LANG);
        for c in [&toy.en_train, &toy.de_translations, &toy.de_dev, &toy.mix_train, &toy.mix_dev] {
            assert!(validate(c).is_empty());
        }
        assert_eq!(toy.de_translations.frame_count(), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(7), generate(7));
        assert_ne!(generate(7).bitext, generate(8).bitext);
    }

    #[test]
    fn translations_match_the_bitext() {
        let toy = generate(DEFAULT_SEED);
        for (s, (_, de)) in toy.de_translations.sentences().iter().zip(&toy.bitext) {
            assert_eq!(&surface(s), de);
        }
    }
}
