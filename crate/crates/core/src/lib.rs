//! Two-tower convolutional network for person-job fit.
//!
//! The crate trains and evaluates a bipartite text matcher: a job posting is
//! a set of requirement items, a resume a set of work-experience items, and
//! both sides are projected onto one shared latent space by per-item 1D
//! convolutional encoders. Job items are aggregated by coordinatewise max,
//! resume items by mean, and fit is scored by cosine similarity. Training
//! contrasts successful applications against negative pairs.
//!
//! Module map:
//! - [`tensor`] / [`tape`]: dense f32 tensors and the reverse-mode gradient tape
//! - [`layers`]: conv1d, batch norm, ReLU, max pooling, parameter init
//! - [`embedding`]: vocabularies and skip-gram word vectors (frozen after training)
//! - [`model`]: the two towers, document encoding, and cosine scoring
//! - [`train`]: contrastive objective, negative sampling, Adam, the training loop
//! - [`checkpoint`]: binary checkpoint serialization
//! - [`data`]: JSONL corpus loading, dataset splits, and the synthetic generator
//! - [`eval`]: ROC-AUC, grouped evaluation, and the mean-vector baseline
//! - [`analysis`]: representation export, per-dimension keywords, item similarity reports

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod layers;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
