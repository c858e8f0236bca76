//! Part-of-speech tagging with bootstrapped training data from tagger agreement.

pub mod bootstrap;
pub mod combine;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod ngram;
pub mod relax;
mod sexp;
pub mod sweep;
pub mod synth;
pub mod tagger;
pub mod tagging;
pub mod tree;

pub use corpus::{Corpus, Sentence, TagId, TagSet, Token, WeightedCorpus};
pub use error::{Error, Result};
