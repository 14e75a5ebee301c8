use ndarray::{s, Array2};

use super::{forward, video_contexts, ScorerConfig, ScorerParams, Sequence};
use crate::baselines::{top_k, top_k_count};
use crate::corpus::{EmbeddedVideo, ScoreTrack, TranscriptSentence};
use crate::Result;

/// Segment and context rows for every segment of `video`.
pub(crate) fn video_inputs(
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    config: &ScorerConfig,
) -> (Array2<f64>, Array2<f64>) {
    let segments = video.segment_matrix().mapv(f64::from);
    let (contexts, _) = video_contexts(video, sentences, config.text_window_s, config.text_mode);
    (segments, contexts)
}

/// Scores every segment, running non-overlapping windows of at most
/// `max_segments` tokens and stitching the results.
pub fn predict_scores(
    params: &ScorerParams,
    config: &ScorerConfig,
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
) -> Result<Vec<f64>> {
    let (segments, contexts) = video_inputs(video, sentences, config);
    let n = segments.nrows();
    let window = params.max_segments();
    let mut scores = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let seq = Sequence {
            segments: segments.slice(s![start..end, ..]).to_owned(),
            contexts: contexts.slice(s![start..end, ..]).to_owned(),
            n_real: end - start,
            targets: Vec::new(),
        };
        scores.extend(forward(params, config, &seq)?);
        start = end;
    }
    Ok(scores)
}

/// Labels the top `t%` of segments (ties to the earlier index) and expands
/// the labels to frames. Segment scores are the raw model outputs.
pub fn infer(
    params: &ScorerParams,
    config: &ScorerConfig,
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    t_percent: f64,
) -> Result<ScoreTrack> {
    crate::pseudo::SelectionConfig { t_percent }.validate()?;
    let scores = predict_scores(params, config, video, sentences)?;
    let selected = top_k(&scores, top_k_count(t_percent, scores.len()));
    Ok(ScoreTrack::from_segment_selection(
        video.video_id.clone(),
        &scores,
        &selected,
        video.segment_len,
        video.n_frames,
    ))
}
