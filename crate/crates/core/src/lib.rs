//! Translation-based cross-lingual semantic role labeling.
//!
//! The crate covers two halves of the pipeline:
//!
//! * manufacturing a pseudo-annotated target-language corpus by projecting
//!   gold source frames through word alignments ([`alignment`], [`postag`],
//!   [`projection`]);
//! * a BiLSTM-CRF role labeler whose recurrent weights can be generated from
//!   a language embedding ([`model`]), scored by [`eval`].

pub mod alignment;
pub mod corpus;
pub mod eval;
pub mod model;
pub mod postag;
pub mod projection;
pub mod toy;

pub use corpus::{Argument, Corpus, PredicateFrame, Sentence, Token};
