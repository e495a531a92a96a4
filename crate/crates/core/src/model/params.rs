//! Named parameter tensors.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub trainable: bool,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
            trainable: true,
        }
    }

    pub fn uniform<R: Rng>(name: &str, shape: &[usize], scale: f64, rng: &mut R) -> Self {
        let mut t = Tensor::zeros(name, shape);
        t.data.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` of a matrix-shaped tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.shape[1];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let width = self.shape[1];
        &mut self.data[i * width..(i + 1) * width]
    }

    pub fn zeros_like(&self) -> Tensor {
        Tensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
            trainable: self.trainable,
        }
    }
}

pub const WORD_EMBEDDING: &str = "word_embedding";
pub const POS_EMBEDDING: &str = "pos_embedding";
pub const PREDICATE_EMBEDDING: &str = "predicate_embedding";
pub const LANGUAGE_EMBEDDING: &str = "language_embedding";
pub const ENCODER: &str = "encoder";
pub const GENERATOR: &str = "pgn_generator";
pub const CRF_EMISSION: &str = "crf_emission";
pub const CRF_TRANSITION: &str = "crf_transition";

/// Every trainable quantity of a model; gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub word: Tensor,
    pub pos: Tensor,
    pub predicate: Tensor,
    /// Language embeddings `e_L`, generated-encoder models only.
    pub language: Option<Tensor>,
    /// Flat encoder parameters `[P]`, or the generator `W_PGN` `[P, lang_dim]`.
    pub encoder: Tensor,
    pub emission: Tensor,
    pub transition: Tensor,
}

impl Params {
    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.word, &self.pos, &self.predicate];
        out.extend(self.language.as_ref());
        out.extend([&self.encoder, &self.emission, &self.transition]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.word, &mut self.pos, &mut self.predicate];
        out.extend(self.language.as_mut());
        out.extend([&mut self.encoder, &mut self.emission, &mut self.transition]);
        out
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            word: self.word.zeros_like(),
            pos: self.pos.zeros_like(),
            predicate: self.predicate.zeros_like(),
            language: self.language.as_ref().map(Tensor::zeros_like),
            encoder: self.encoder.zeros_like(),
            emission: self.emission.zeros_like(),
            transition: self.transition.zeros_like(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}
