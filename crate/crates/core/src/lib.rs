//! Sentence simplification toolkit: complexity-weighted training loss,
//! rank-penalized diverse beam search, candidate clustering and
//! fluency/adequacy/simplicity reranking, with the complexity predictors,
//! language model and evaluation metrics they rely on.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the instantiations the pipeline uses.

pub mod candidates;
pub mod complexity;
pub mod corpus;
pub mod decoder;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod ngram_lm;
pub mod numeric;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;
pub mod weighted_loss;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type EmbeddingTableF64 = embeddings::EmbeddingTable<f64>;
pub type EmbeddingTableF32 = embeddings::EmbeddingTable<f32>;
pub type LinearModelF64 = complexity::LinearModel<f64>;
pub type SentenceCnnF64 = complexity::SentenceCnn<f64>;
pub type SentenceCnnF32 = complexity::SentenceCnn<f32>;
pub type CnnComplexityF64 = complexity::CnnComplexity<f64>;
pub type ComplexityTableF64 = weighted_loss::ComplexityTable<f64>;
pub type VocabWeightsF64 = weighted_loss::VocabWeights<f64>;
pub type MeanEmbedderF64 = embeddings::MeanEmbedder<f64>;
pub type ToyScorerF64 = decoder::ToyScorer<f64>;
pub type ToyScorerF32 = decoder::ToyScorer<f32>;
pub type TableScorerF64 = decoder::TableScorer<f64>;
pub type HypothesisF64 = decoder::Hypothesis<f64>;
pub type CandidateF64 = candidates::Candidate<f64>;
pub type ScoredCandidateF64 = candidates::ScoredCandidate<f64>;
