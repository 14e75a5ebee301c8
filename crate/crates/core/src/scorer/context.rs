use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedVideo, TranscriptSentence};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextContextMode {
    /// Mean of the sentences overlapping the segment's padded time span.
    #[default]
    Windowed,
    /// Mean of every sentence of the video, shared by all segments.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextContext {
    pub vec: Vec<f64>,
    pub no_text: bool,
}

/// Mean of the vectors of sentences whose `[start_s, end_s]` intersects
/// `[a - window_s, b + window_s]` for segment span `[a, b)`; zero vector and
/// `no_text` when none do.
pub fn segment_text_context(
    span_s: (f64, f64),
    sentences: &[TranscriptSentence],
    window_s: f64,
    dim: usize,
) -> TextContext {
    let (lo, hi) = (span_s.0 - window_s, span_s.1 + window_s);
    mean_context(
        sentences.iter().filter(|s| s.start_s <= hi && s.end_s >= lo),
        dim,
    )
}

fn mean_context<'a>(sentences: impl Iterator<Item = &'a TranscriptSentence>, dim: usize) -> TextContext {
    let mut acc = vec![0.0f64; dim];
    let mut count = 0usize;
    for s in sentences {
        for (a, &x) in acc.iter_mut().zip(&s.vec) {
            *a += f64::from(x);
        }
        count += 1;
    }
    if count == 0 {
        return TextContext { vec: acc, no_text: true };
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    TextContext { vec: acc, no_text: false }
}

/// Context rows for every segment of `video`, plus the count of segments
/// without text.
pub fn video_contexts(
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    window_s: f64,
    mode: TextContextMode,
) -> (Array2<f64>, usize) {
    let dim = video.dim();
    let n = video.n_segments();
    let mut out = Array2::zeros((n, dim));
    let mut missing = 0;
    let global = (mode == TextContextMode::Global).then(|| mean_context(sentences.iter(), dim));
    for i in 0..n {
        let ctx = match &global {
            Some(g) => g.clone(),
            None => segment_text_context(video.segment_span_s(i), sentences, window_s, dim),
        };
        missing += usize::from(ctx.no_text);
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&ctx.vec));
    }
    (out, missing)
}
