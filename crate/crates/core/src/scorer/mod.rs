//! Segment-scoring attention model.
//!
//! Each segment becomes one token: its video embedding concatenated with a
//! transcript context vector passed through a two-layer fuser, projected to
//! the model width, plus a learned positional row. A stack of
//! pre-normalization encoder blocks follows, and an affine head with a
//! sigmoid yields one importance score in `(0, 1)` per segment. Training
//! regresses these scores onto pseudo-summary targets with mean squared
//! error; gradients are derived by hand and checked against finite
//! differences in the tests.

mod checkpoint;
mod context;
mod infer;
mod model;
mod params;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use context::{segment_text_context, video_contexts, TextContext, TextContextMode};
pub use infer::{infer, predict_scores};
pub use model::{forward, loss, loss_and_grads, mse, DropoutSeed, Sequence};
pub use params::{LayerParams, ScorerParams};
pub use train::{
    build_examples, evaluation_mse, train, train_from, AdamState, TrainConfig, TrainOutcome,
    TrainingExample,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub dropout: f64,
    /// Size of the positional table; longer videos are windowed.
    pub max_segments: usize,
    /// Sentences within this many seconds of a segment feed its context.
    pub text_window_s: f64,
    pub text_mode: TextContextMode,
    pub seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            d_model: 256,
            n_layers: 24,
            n_heads: 8,
            dropout: 0.1,
            max_segments: 28,
            text_window_s: 5.0,
            text_mode: TextContextMode::Windowed,
            seed: 0,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 {
            return Err(Error::Config("d_model, n_layers and n_heads must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.max_segments == 0 {
            return Err(Error::Config("max_segments must be positive".into()));
        }
        if !(self.text_window_s >= 0.0) {
            return Err(Error::Config("text_window_s must be non-negative".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}
