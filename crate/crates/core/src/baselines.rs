//! Unsupervised cross-modal baselines operating on a single video.
//!
//! All three score units by mean similarity to the transcript sentences and
//! keep the top `t%`; they differ in the unit: frames, segments, or merged
//! steps.

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedVideo, ScoreTrack, TranscriptSentence};
use crate::grouping::{group_into_steps, unit_segments, MergeMode};
use crate::pseudo::{cross_modal, select_top_t, unit_sentences, SelectionConfig};
use crate::vecmath::{mean_similarity, normalized, rescale_unit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Frame,
    Segment,
    Step,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Frame => "frame_cross_modal",
            BaselineKind::Segment => "segment_cross_modal",
            BaselineKind::Step => "step_cross_modal",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frame" | "frame_cross_modal" => Ok(BaselineKind::Frame),
            "segment" | "segment_cross_modal" => Ok(BaselineKind::Segment),
            "step" | "step_cross_modal" => Ok(BaselineKind::Step),
            other => Err(format!("unknown baseline {other:?} (frame | segment | step)")),
        }
    }
}

/// `max(1, floor(t/100 * n))`.
pub fn top_k_count(t_percent: f64, n: usize) -> usize {
    ((t_percent / 100.0 * n as f64).floor() as usize).clamp(1, n.max(1))
}

/// Indices of the `k` highest scores; ties go to the earlier index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        selected[i] = true;
    }
    selected
}

/// Frame scores are mean sentence similarities; the top `t%` of the
/// summarizable frames are chosen and a segment joins the summary when at
/// least half of its frames are chosen.
pub fn frame_cross_modal(
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    t_percent: f64,
) -> Result<ScoreTrack> {
    let ff = video.frame_features.as_ref().ok_or_else(|| {
        Error::Invalid(format!("video {}: frame features are required", video.video_id))
    })?;
    let units = unit_sentences(sentences)?;
    if let Some(u) = units.first() {
        if u.len() != ff.ncols() {
            return Err(Error::DimMismatch {
                video_id: video.video_id.clone(),
                expected: ff.ncols(),
                found: u.len(),
            });
        }
    }
    let covered = video.summarizable_frames();
    let frame_scores: Vec<f64> = ff
        .rows()
        .into_iter()
        .take(covered)
        .enumerate()
        .map(|(i, row)| {
            let row = row.to_vec();
            let unit = normalized(&row, || format!("video {} frame {i}", video.video_id))?;
            Ok(mean_similarity(&unit, &units))
        })
        .collect::<Result<_>>()?;
    let chosen = top_k(&frame_scores, top_k_count(t_percent, covered));
    let seg_len = video.segment_len;
    let seg_scores: Vec<f64> = frame_scores
        .chunks_exact(seg_len)
        .map(|c| c.iter().sum::<f64>() / seg_len as f64)
        .collect();
    let counts: Vec<usize> = chosen
        .chunks_exact(seg_len)
        .map(|c| c.iter().filter(|&&x| x).count())
        .collect();
    let mut selected: Vec<bool> = counts.iter().map(|&c| 2 * c >= seg_len).collect();
    if !selected.contains(&true) {
        // Keep the segment holding the most chosen frames.
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i);
        selected[best] = true;
    }
    Ok(ScoreTrack::from_segment_selection(
        video.video_id.clone(),
        &rescale_unit(&seg_scores),
        &selected,
        seg_len,
        video.n_frames,
    ))
}

/// Raw per-segment mean similarity to the sentences (0 without transcript).
pub fn segment_similarity(video: &EmbeddedVideo, sentences: &[TranscriptSentence]) -> Result<Vec<f64>> {
    let units = unit_sentences(sentences)?;
    Ok(unit_segments(video)?
        .vecs
        .iter()
        .map(|s| mean_similarity(s, &units))
        .collect())
}

pub fn segment_cross_modal(
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    t_percent: f64,
) -> Result<ScoreTrack> {
    let scores = segment_similarity(video, sentences)?;
    let selected = top_k(&scores, top_k_count(t_percent, scores.len()));
    Ok(ScoreTrack::from_segment_selection(
        video.video_id.clone(),
        &rescale_unit(&scores),
        &selected,
        video.segment_len,
        video.n_frames,
    ))
}

/// Steps scored by mean sentence similarity, selected as whole steps with
/// the pseudo-summary budget rule.
pub fn step_cross_modal(
    video: &EmbeddedVideo,
    sentences: &[TranscriptSentence],
    t_percent: f64,
    merge_mode: MergeMode,
) -> Result<ScoreTrack> {
    let steps = group_into_steps(video, merge_mode)?;
    let (cms, _) = cross_modal(&steps, sentences)?;
    let config = SelectionConfig { t_percent };
    Ok(select_top_t(&steps, &cms, &config, video).0)
}

pub fn run_baseline(
    kind: BaselineKind,
    video: &EmbeddedVideo,
    t_percent: f64,
    merge_mode: MergeMode,
) -> Result<ScoreTrack> {
    SelectionConfig { t_percent }.validate()?;
    match kind {
        BaselineKind::Frame => frame_cross_modal(video, &video.transcript, t_percent),
        BaselineKind::Segment => segment_cross_modal(video, &video.transcript, t_percent),
        BaselineKind::Step => step_cross_modal(video, &video.transcript, t_percent, merge_mode),
    }
}
