//! BiLSTM-CRF semantic role labeler with optional language-generated encoder
//! weights.
//!
//! Each token is represented by its word, POS and predicate-indicator
//! embeddings, concatenated. A stack of bidirectional LSTMs encodes the
//! sentence; for [`Variant::Pgn`] the stack's weights are produced per
//! language as `W_PGN · e_L`. Per-position label scores `o_i = W h_i` feed a
//! linear-chain CRF, decoded with Viterbi. The labeler predicts the roles of
//! one given predicate at a time.

pub mod checkpoint;
pub mod crf;
pub mod lstm;
pub mod params;
pub mod pgn;
pub mod train;
pub mod vocab;

use std::borrow::Cow;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Argument, Corpus, PredicateFrame, Sentence, EMPTY};
use crf::CrfScores;
use lstm::{Gate, LstmLayout};
use params::{Params, Tensor};
use vocab::{Embeddings, Vocabs, OUTSIDE};

pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use train::{gradient_check, train, train_with_callback, GradCheckReport, TrainReport};

/// Uniform initialization range for every parameter.
pub const INIT_SCALE: f64 = 0.1;
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown language {0:?}")]
    UnknownLanguage(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("predicate index {index} outside a sentence of {len} tokens")]
    InvalidPredicate { index: usize, len: usize },
    #[error("training corpus has no predicate frames")]
    NoFrames,
    #[error("no language embeddings (basic variant)")]
    NoLanguageEmbeddings,
    #[error("embeddings line {line}: {message}")]
    Embeddings { line: usize, message: String },
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("unexpected end of container")]
    Truncated,
    #[error("checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint tensors do not match its configuration: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One shared set of encoder weights.
    Basic,
    /// Encoder weights generated from a language embedding.
    Pgn,
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(Variant::Basic),
            "pgn" => Ok(Variant::Pgn),
            other => Err(ModelError::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub pred_dim: usize,
    pub lang_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Filled in from the training data.
    pub label_count: usize,
    /// Filled in from the training data.
    pub language_count: usize,
    pub variant: Variant,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: f64,
    /// Keep a fixed summation order in training. Training is sequential, so
    /// this is always honored.
    pub deterministic: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 300,
            pos_dim: 100,
            pred_dim: 100,
            lang_dim: 32,
            hidden: 650,
            layers: 3,
            label_count: 0,
            language_count: 0,
            variant: Variant::Pgn,
            learning_rate: 0.0005,
            batch_size: 50,
            epochs: 80,
            seed: 42,
            clip_norm: 5.0,
            deterministic: true,
        }
    }
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pos_dim + self.pred_dim
    }

    pub fn layout(&self) -> LstmLayout {
        LstmLayout::new(self.input_dim(), self.hidden, self.layers)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("pred_dim", self.pred_dim),
            ("lang_dim", self.lang_dim),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("label_count", self.label_count),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.variant == Variant::Pgn && self.language_count == 0 {
            return Err(ModelError::Config("language_count must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(ModelError::Config("learning_rate and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// One predicate of one sentence with its gold label sequence.
#[derive(Debug, Clone)]
pub struct TrainingExample<'a> {
    pub sentence: &'a Sentence,
    pub frame: &'a PredicateFrame,
    /// One label per token, [`OUTSIDE`] for non-arguments.
    pub labels: Vec<String>,
}

impl<'a> TrainingExample<'a> {
    pub fn new(sentence: &'a Sentence, frame: &'a PredicateFrame) -> Self {
        let labels = (1..=sentence.len())
            .map(|i| frame.role_of(i).unwrap_or(OUTSIDE).to_string())
            .collect();
        TrainingExample {
            sentence,
            frame,
            labels,
        }
    }

    /// One example per frame, in corpus order.
    pub fn from_corpus(corpus: &'a Corpus) -> Vec<Self> {
        corpus
            .sentences()
            .iter()
            .flat_map(|s| s.frames.iter().map(move |f| TrainingExample::new(s, f)))
            .collect()
    }
}

/// A sentence mapped to symbol indices, with the predicate as a 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub words: Vec<usize>,
    pub tags: Vec<usize>,
    pub predicate: usize,
    pub language: usize,
    /// Gold label indices; empty when unknown.
    pub gold: Vec<usize>,
}

impl EncodedExample {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Intermediate values of one forward pass.
struct ForwardPass<'m> {
    weights: Cow<'m, [f64]>,
    hidden: Vec<f64>,
    cache: lstm::EncoderCache,
    emissions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrlModel {
    config: ModelConfig,
    vocabs: Vocabs,
    params: Params,
}

impl SrlModel {
    /// A freshly initialized model. With `embeddings`, the word table is
    /// copied from them and frozen; `vocabs.words` must list the same words.
    pub fn new(mut config: ModelConfig, vocabs: Vocabs, embeddings: Option<&Embeddings>) -> Result<Self, ModelError> {
        config.label_count = vocabs.labels.len();
        config.language_count = vocabs.languages.len();
        if let Some(e) = embeddings {
            config.word_dim = e.dim;
        }
        config.validate()?;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layout = config.layout();
        let word = match embeddings {
            Some(e) => {
                let mut t = Tensor::zeros(params::WORD_EMBEDDING, &[vocabs.words.len(), e.dim]);
                for (i, w) in e.words.iter().enumerate() {
                    let row = vocabs.words.get(w).ok_or_else(|| {
                        ModelError::Dimension(format!("pretrained word {w:?} missing from the vocabulary"))
                    })?;
                    t.row_mut(row).copy_from_slice(e.vector(i));
                }
                t.trainable = false;
                t
            }
            None => Tensor::uniform(params::WORD_EMBEDDING, &[vocabs.words.len(), config.word_dim], INIT_SCALE, &mut rng),
        };
        let pos = Tensor::uniform(params::POS_EMBEDDING, &[vocabs.tags.len(), config.pos_dim], INIT_SCALE, &mut rng);
        let predicate = Tensor::uniform(params::PREDICATE_EMBEDDING, &[2, config.pred_dim], INIT_SCALE, &mut rng);
        let (language, encoder) = match config.variant {
            Variant::Basic => {
                let mut encoder = Tensor::uniform(params::ENCODER, &[layout.param_len()], INIT_SCALE, &mut rng);
                for l in 0..layout.layers {
                    for d in 0..2 {
                        encoder.data[layout.bias_range(l, d, Gate::Forget)].fill(FORGET_BIAS);
                    }
                }
                (None, encoder)
            }
            Variant::Pgn => {
                let language = Tensor::uniform(
                    params::LANGUAGE_EMBEDDING,
                    &[config.language_count, config.lang_dim],
                    INIT_SCALE,
                    &mut rng,
                );
                let generator = Tensor::uniform(params::GENERATOR, &[layout.param_len(), config.lang_dim], INIT_SCALE, &mut rng);
                (Some(language), generator)
            }
        };
        let k = config.label_count;
        let emission = Tensor::uniform(params::CRF_EMISSION, &[k, layout.output_dim()], INIT_SCALE, &mut rng);
        let transition = Tensor::uniform(params::CRF_TRANSITION, &[k + 2, k + 2], INIT_SCALE, &mut rng);

        Ok(SrlModel {
            config,
            vocabs,
            params: Params {
                word,
                pos,
                predicate,
                language,
                encoder,
                emission,
                transition,
            },
        })
    }

    pub(crate) fn from_parts(config: ModelConfig, vocabs: Vocabs, params: Params) -> Self {
        SrlModel { config, vocabs, params }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocabs(&self) -> &Vocabs {
        &self.vocabs
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Encodes a sentence for labeling the predicate at 1-based `pred_index`.
    pub fn encode_input(&self, sentence: &Sentence, pred_index: usize) -> Result<EncodedExample, ModelError> {
        if pred_index == 0 || pred_index > sentence.len() {
            return Err(ModelError::InvalidPredicate {
                index: pred_index,
                len: sentence.len(),
            });
        }
        let language = match self.config.variant {
            Variant::Basic => 0,
            Variant::Pgn => self
                .vocabs
                .language_index(&sentence.lang)
                .ok_or_else(|| ModelError::UnknownLanguage(sentence.lang.clone()))?,
        };
        Ok(EncodedExample {
            words: sentence.tokens.iter().map(|t| self.vocabs.words.lookup(&t.form)).collect(),
            tags: sentence.tokens.iter().map(|t| self.vocabs.tags.lookup(&t.upos)).collect(),
            predicate: pred_index - 1,
            language,
            gold: Vec::new(),
        })
    }

    pub fn encode_example(&self, example: &TrainingExample<'_>) -> Result<EncodedExample, ModelError> {
        let mut encoded = self.encode_input(example.sentence, example.frame.pred_index)?;
        encoded.gold = example
            .labels
            .iter()
            .map(|l| self.vocabs.label_index(l).ok_or_else(|| ModelError::UnknownLabel(l.clone())))
            .collect::<Result<_, _>>()?;
        Ok(encoded)
    }

    fn features(&self, ex: &EncodedExample) -> Vec<f64> {
        let p = &self.params;
        let mut x = Vec::with_capacity(ex.len() * self.config.input_dim());
        for i in 0..ex.len() {
            x.extend_from_slice(p.word.row(ex.words[i]));
            x.extend_from_slice(p.pos.row(ex.tags[i]));
            x.extend_from_slice(p.predicate.row(usize::from(i == ex.predicate)));
        }
        x
    }

    /// Concatenated word, POS and predicate-indicator vectors, one per token.
    pub fn build_features(&self, ex: &EncodedExample) -> Vec<Vec<f64>> {
        self.features(ex)
            .chunks_exact(self.config.input_dim())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Encoder parameters for a language: stored for the basic variant,
    /// generated for the PGN variant.
    pub fn encoder_weights(&self, language: usize) -> Cow<'_, [f64]> {
        match &self.params.language {
            None => Cow::Borrowed(&self.params.encoder.data),
            Some(table) => Cow::Owned(
                pgn::pgn_params(&self.params.encoder.data, table.row(language))
                    .expect("generator shape fixed at construction"),
            ),
        }
    }

    fn forward(&self, ex: &EncodedExample) -> ForwardPass<'_> {
        let n = ex.len();
        let features = self.features(ex);
        let weights = self.encoder_weights(ex.language);
        let (hidden, cache) = lstm::forward(&weights, &self.config.layout(), &features, n);
        let k = self.config.label_count;
        let width = self.config.layout().output_dim();
        let mut emissions = vec![0.0; n * k];
        for i in 0..n {
            let h = &hidden[i * width..(i + 1) * width];
            for y in 0..k {
                emissions[i * k + y] = self.params.emission.row(y).iter().zip(h).map(|(w, v)| w * v).sum();
            }
        }
        ForwardPass {
            weights,
            hidden,
            cache,
            emissions,
        }
    }

    /// Top-layer states `h_1..h_n`, each of length `2 * hidden`.
    pub fn encode(&self, ex: &EncodedExample) -> Vec<Vec<f64>> {
        let pass = self.forward(ex);
        pass.hidden
            .chunks_exact(self.config.layout().output_dim())
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// CRF emission scores, `n × label_count`.
    pub fn emissions(&self, ex: &EncodedExample) -> Vec<f64> {
        self.forward(ex).emissions
    }

    fn scores<'a>(&'a self, emissions: &'a [f64]) -> CrfScores<'a> {
        CrfScores::new(emissions, &self.params.transition.data, self.config.label_count)
    }

    pub fn loss(&self, ex: &EncodedExample) -> f64 {
        let pass = self.forward(ex);
        crf::neg_log_likelihood(&self.scores(&pass.emissions), &ex.gold)
    }

    /// Loss of one example; adds `scale` times its gradient to `grads`.
    pub fn loss_and_grad(&self, ex: &EncodedExample, grads: &mut Params, scale: f64) -> f64 {
        let n = ex.len();
        let k = self.config.label_count;
        let layout = self.config.layout();
        let width = layout.output_dim();
        let pass = self.forward(ex);

        let mut d_emissions = vec![0.0; n * k];
        let loss = crf::neg_log_likelihood_with_grad(
            &self.scores(&pass.emissions),
            &ex.gold,
            scale,
            &mut d_emissions,
            &mut grads.transition.data,
        );

        let mut d_hidden = vec![0.0; n * width];
        for i in 0..n {
            let h = &pass.hidden[i * width..(i + 1) * width];
            let dh = &mut d_hidden[i * width..(i + 1) * width];
            for y in 0..k {
                let g = d_emissions[i * k + y];
                if g == 0.0 {
                    continue;
                }
                let w = self.params.emission.row(y);
                let dw = grads.emission.row_mut(y);
                for c in 0..width {
                    dw[c] += g * h[c];
                    dh[c] += g * w[c];
                }
            }
        }

        let d_features = match (&self.params.language, grads.language.as_mut()) {
            (Some(table), Some(d_table)) => {
                let mut d_weights = vec![0.0; layout.param_len()];
                let d_x = lstm::backward(&pass.weights, &layout, &pass.cache, &d_hidden, &mut d_weights);
                pgn::pgn_backward(
                    &self.params.encoder.data,
                    table.row(ex.language),
                    &d_weights,
                    &mut grads.encoder.data,
                    d_table.row_mut(ex.language),
                );
                d_x
            }
            _ => lstm::backward(&pass.weights, &layout, &pass.cache, &d_hidden, &mut grads.encoder.data),
        };

        let (wd, pd) = (self.config.word_dim, self.config.pos_dim);
        let dim = self.config.input_dim();
        for i in 0..n {
            let dx = &d_features[i * dim..(i + 1) * dim];
            if grads.word.trainable {
                add_into(grads.word.row_mut(ex.words[i]), &dx[..wd]);
            }
            add_into(grads.pos.row_mut(ex.tags[i]), &dx[wd..wd + pd]);
            add_into(grads.predicate.row_mut(usize::from(i == ex.predicate)), &dx[wd + pd..]);
        }
        loss
    }

    /// Viterbi label indices for one example.
    pub fn decode(&self, ex: &EncodedExample) -> Vec<usize> {
        let pass = self.forward(ex);
        crf::viterbi(&self.scores(&pass.emissions))
    }

    /// Labels the arguments of the predicate at 1-based `pred_index`.
    ///
    /// The sense is taken from the sentence's existing frame for that
    /// predicate, else from the token's lemma (or form). A label predicted
    /// on the predicate token itself is discarded.
    pub fn predict(&self, sentence: &Sentence, pred_index: usize) -> Result<PredicateFrame, ModelError> {
        let ex = self.encode_input(sentence, pred_index)?;
        let labels = self.decode(&ex);
        let args = labels
            .iter()
            .enumerate()
            .filter(|&(i, &y)| y != 0 && i != ex.predicate)
            .map(|(i, &y)| Argument::new(i + 1, self.vocabs.labels[y].clone()))
            .collect();
        let sense = match sentence.frame(pred_index) {
            Some(frame) => frame.sense.clone(),
            None => {
                let token = &sentence.tokens[pred_index - 1];
                if token.lemma != EMPTY { token.lemma.clone() } else { token.form.clone() }
            }
        };
        Ok(PredicateFrame::new(pred_index, sense, args))
    }

    /// Re-labels the arguments of every given predicate in `corpus`.
    pub fn predict_corpus(&self, corpus: &Corpus) -> Result<Corpus, ModelError> {
        let mut sentences = Vec::with_capacity(corpus.len());
        for sentence in corpus.sentences() {
            let frames = sentence
                .frames
                .iter()
                .map(|f| self.predict(sentence, f.pred_index))
                .collect::<Result<Vec<_>, _>>()?;
            let mut out = sentence.clone();
            out.frames = frames;
            sentences.push(out);
        }
        Ok(Corpus::new(sentences))
    }

    /// Pairwise Euclidean distances between language embeddings.
    pub fn language_distances(&self) -> Result<Vec<Vec<f64>>, ModelError> {
        let table = self.params.language.as_ref().ok_or(ModelError::NoLanguageEmbeddings)?;
        let rows = table.shape[0];
        Ok((0..rows)
            .map(|a| {
                (0..rows)
                    .map(|b| {
                        table
                            .row(a)
                            .iter()
                            .zip(table.row(b))
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
