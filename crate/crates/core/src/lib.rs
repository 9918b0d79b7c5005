//! Gradient boosting with small transformer encoders as weak learners.
//!
//! The crate provides the multiclass boosting mathematics, a trainable
//! transformer encoder, attention-based vocabulary pruning, residual-norm
//! importance sampling, and a numerical check of the optimal-sampling
//! result.

pub mod attention;
pub mod boosting;
pub mod checkpoint;
pub mod clock;
pub mod data;
pub mod error;
pub mod experiment;
pub mod files;
pub mod importance;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod transformer;

pub use attention::AttentionRecord;
pub use error::{Error, Result};
pub use scalar::{DType, Scalar};
