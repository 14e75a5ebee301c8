//! Weakly-supervised summarization of instructional videos.
//!
//! The pipeline works entirely over precomputed embeddings:
//!
//! 1. [`grouping`] merges fixed-length segments into steps by similarity.
//! 2. [`pseudo`] scores steps by task relevance (similarity to the steps of
//!    every other video of the same task) and cross-modal saliency
//!    (similarity to the transcript) and keeps the top `t%` as a pseudo
//!    summary.
//! 3. [`scorer`] trains an encoder-only attention model on those pseudo
//!    scores and predicts segment importance for new videos.
//! 4. [`gt`] builds reference summaries from localized step illustrations,
//!    [`baselines`] provides unsupervised cross-modal baselines, and
//!    [`eval`] scores summaries (F-score, Kendall tau-b, Spearman rho,
//!    step recall).
//!
//! [`synth`] generates corpora with planted structure so every stage can
//! be checked without real features.

pub mod baselines;
pub mod corpus;
mod error;
pub mod eval;
pub mod grouping;
pub mod gt;
pub mod pseudo;
pub mod scorer;
pub mod synth;
pub mod vecmath;

pub use error::{Error, Result};
