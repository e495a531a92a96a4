//! Mini-batch training with Adam, and a finite-difference gradient check.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Params, Tensor};
use super::vocab::{Embeddings, Vocab, Vocabs};
use super::{EncodedExample, ModelConfig, ModelError, SrlModel, TrainingExample};
use crate::corpus::Corpus;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Stream offset separating the shuffling RNG from the initialization RNG.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    pub examples: usize,
}

struct Adam {
    m: Params,
    v: Params,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(params: &Params, lr: f64) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            if !p.trainable {
                continue;
            }
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.data[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut Params, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .filter(|t| t.trainable)
        .flat_map(|t| t.data.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }
    norm
}

/// Vocabularies for a training run. With pretrained vectors, the word table
/// is exactly the pretrained vocabulary and other forms map to unknown.
pub fn build_vocabs(corpus: &Corpus, embeddings: Option<&Embeddings>) -> Vocabs {
    let mut vocabs = Vocabs::from_corpus(corpus);
    if let Some(e) = embeddings {
        vocabs.words = Vocab::with_unknown(e.words.iter().cloned());
    }
    vocabs
}

pub fn train(corpus: &Corpus, config: ModelConfig, embeddings: Option<&Embeddings>) -> Result<(SrlModel, TrainReport), ModelError> {
    train_with_callback(corpus, config, embeddings, |_, _| {})
}

/// Trains a fresh model; `on_epoch(epoch, mean_loss)` runs after each epoch.
pub fn train_with_callback(
    corpus: &Corpus,
    config: ModelConfig,
    embeddings: Option<&Embeddings>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(SrlModel, TrainReport), ModelError> {
    let examples = TrainingExample::from_corpus(corpus);
    if examples.is_empty() {
        return Err(ModelError::NoFrames);
    }
    let vocabs = build_vocabs(corpus, embeddings);
    let mut model = SrlModel::new(config, vocabs, embeddings)?;
    let encoded = examples
        .iter()
        .map(|ex| model.encode_example(ex))
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = model.config().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut adam = Adam::new(model.params(), cfg.learning_rate);
    let mut grads = model.params().zeros_like();
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                total += model.loss_and_grad(&encoded[i], &mut grads, scale);
            }
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.update(model.params_mut(), &grads);
        }
        let mean = total / encoded.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch + 1, mean);
    }

    Ok((
        model,
        TrainReport {
            epoch_losses,
            examples: encoded.len(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Analytic and numeric values at the worst coordinate.
    pub worst: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    pub per_tensor: Vec<TensorCheck>,
}

/// Denominator floor of the relative error. Central differences at
/// `ε = 1e-5` carry roughly `1e-10` of rounding noise, so gradients smaller
/// than this floor are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Coordinates of `tensor` that can influence the loss of `ex`.
fn live_coordinates(tensor: &Tensor, params: &Params, ex: &EncodedExample) -> Vec<usize> {
    let rows: Option<BTreeSet<usize>> = if tensor.name == params.word.name {
        Some(ex.words.iter().copied().collect())
    } else if tensor.name == params.pos.name {
        Some(ex.tags.iter().copied().collect())
    } else if tensor.name == params.predicate.name {
        Some((0..ex.len()).map(|i| usize::from(i == ex.predicate)).collect())
    } else if params.language.as_ref().is_some_and(|l| l.name == tensor.name) {
        Some(BTreeSet::from([ex.language]))
    } else {
        None
    };
    match rows {
        None => (0..tensor.len()).collect(),
        Some(rows) => {
            let width = tensor.shape[1];
            rows.into_iter().flat_map(|r| r * width..(r + 1) * width).collect()
        }
    }
}

/// Compares analytic gradients with central differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε` on up to `per_tensor` sampled coordinates of
/// every trainable tensor.
pub fn gradient_check(model: &SrlModel, ex: &EncodedExample, epsilon: f64, per_tensor: usize, seed: u64) -> GradCheckReport {
    let mut grads = model.params().zeros_like();
    model.loss_and_grad(ex, &mut grads, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: 0,
        per_tensor: Vec::new(),
    };
    let tensor_count = model.params().tensors().len();
    for ti in 0..tensor_count {
        let tensor = model.params().tensors()[ti];
        if !tensor.trainable {
            continue;
        }
        let mut coords = live_coordinates(tensor, model.params(), ex)
            .into_iter()
            .choose_multiple(&mut rng, per_tensor);
        coords.sort_unstable();
        let mut check = TensorCheck {
            name: tensor.name.clone(),
            coordinates: coords.len(),
            max_rel_error: 0.0,
            worst: (0.0, 0.0),
        };
        for c in coords {
            let original = tensor.data[c];
            probe.params_mut().tensors_mut()[ti].data[c] = original + epsilon;
            let plus = probe.loss(ex);
            probe.params_mut().tensors_mut()[ti].data[c] = original - epsilon;
            let minus = probe.loss(ex);
            probe.params_mut().tensors_mut()[ti].data[c] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = grads.tensors()[ti].data[c];
            let rel = relative_error(analytic, numeric);
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst = (analytic, numeric);
            }
        }
        report.coordinates += check.coordinates;
        report.max_rel_error = report.max_rel_error.max(check.max_rel_error);
        report.per_tensor.push(check);
    }
    report
}
