//! Domain-specialized query transformation for dense retrieval.
//!
//! A query embedding `x` is passed through a mixture-of-experts module: a
//! multi-label gate predicts how strongly the query belongs to each domain,
//! one small specializer per domain proposes a correction, and the output is
//! `x + Σ gᵢ · fᵢ(x)`. Document embeddings are untouched, so an existing
//! index can be reused.
//!
//! Modules:
//! - [`vecmath`]: vectors, matrices, activations, similarity, the seeded RNG.
//! - [`moe`]: gate, specializers, pooling and the checkpoint format.
//! - [`training`]: contrastive + BCE objective, hand-written gradients, Adam,
//!   and a finite-difference gradient checker.
//! - [`labeler`]: query-domain labels from a category graph.
//! - [`eval`]: exact retrieval, ranking metrics, paired t-tests and a
//!   synthetic benchmark.
//! - [`demb`]: the binary embedding file format.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod demb;
pub mod domain;
pub mod error;
pub mod eval;
pub mod labeler;
pub mod moe;
pub mod scalar;
pub mod training;
pub mod vecmath;

pub use domain::DomainLabelVector;
pub use error::{Error, Result};
pub use moe::{moe_transform, GateNormalization, MoeMode, MoeParams, Pooling};
pub use scalar::Scalar;
pub use training::{TrainConfig, TrainingExample};
pub use vecmath::{Matrix, Rng, Similarity, Vector};

pub type Vector32 = Vector<f32>;
pub type Vector64 = Vector<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type MoeParams32 = MoeParams<f32>;
pub type MoeParams64 = MoeParams<f64>;
pub type TrainingExample32 = TrainingExample<f32>;
pub type TrainingExample64 = TrainingExample<f64>;
pub type EmbeddingStore32 = eval::EmbeddingStore<f32>;
pub type EmbeddingStore64 = eval::EmbeddingStore<f64>;
