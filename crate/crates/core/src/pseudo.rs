//! Pseudo-summary generation.
//!
//! Every step gets a task-relevance score (mean similarity to all steps of
//! all videos of its task, itself included) and a cross-modal score (mean
//! similarity to all transcript sentences of its own video). Their average
//! is the step's importance, inherited by its segments; the highest-scoring
//! whole steps are kept until they cover `t%` of the summarizable frames.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedVideo, ScoreTrack, TaskGroup, TranscriptSentence};
use crate::grouping::{group_into_steps, MergeMode, Step};
use crate::vecmath::{dot, mean_similarity, normalized, rescale_unit};
use crate::{Error, Result};

pub const DEFAULT_T_PERCENT: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub t_percent: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            t_percent: DEFAULT_T_PERCENT,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_percent > 0.0 && self.t_percent <= 100.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "t_percent must lie in (0, 100], got {}",
                self.t_percent
            )))
        }
    }
}

/// Which scores feed the importance. `Both` is the full method; the others
/// are ablations (`CrossModalOnly` is what a single video allows).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objectives {
    #[default]
    Both,
    TaskRelevanceOnly,
    CrossModalOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoConfig {
    pub selection: SelectionConfig,
    pub merge_mode: MergeMode,
    pub objectives: Objectives,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScores {
    pub trs: f64,
    pub cms: f64,
    pub importance: f64,
}

/// Task relevance of every step of every video in one task.
///
/// `trs(S_i) = 1/|S| * sum_{j in S} S_i . S_j` over all steps of the task,
/// including `S_i` itself. Step vectors are expected to be unit length.
pub fn task_relevance(steps_by_video: &[Vec<Step>]) -> Result<Vec<Vec<f64>>> {
    let all: Vec<&[f64]> = steps_by_video
        .iter()
        .flatten()
        .map(|s| s.vec.as_slice())
        .collect();
    if all.is_empty() {
        return Err(Error::Invalid("task relevance needs at least one step".into()));
    }
    let total = all.len() as f64;
    // Sum of all step vectors: S_i . sum_j S_j equals the pairwise sum.
    let dim = all[0].len();
    let mut sum = vec![0.0; dim];
    for v in &all {
        for (a, x) in sum.iter_mut().zip(*v) {
            *a += x;
        }
    }
    Ok(steps_by_video
        .iter()
        .map(|steps| steps.iter().map(|s| dot(&s.vec, &sum) / total).collect())
        .collect())
}

/// Cross-modal score of each step: mean similarity to every sentence of the
/// video. With no transcript all scores are 0 and the flag is set.
pub fn cross_modal(steps: &[Step], sentences: &[TranscriptSentence]) -> Result<(Vec<f64>, bool)> {
    if sentences.is_empty() {
        return Ok((vec![0.0; steps.len()], true));
    }
    let units = unit_sentences(sentences)?;
    Ok((
        steps.iter().map(|s| mean_similarity(&s.vec, &units)).collect(),
        false,
    ))
}

pub(crate) fn unit_sentences(sentences: &[TranscriptSentence]) -> Result<Vec<Vec<f64>>> {
    sentences
        .iter()
        .enumerate()
        .map(|(k, s)| normalized(&s.vec, || format!("sentence {k}")))
        .collect()
}

pub fn importance(trs: &[f64], cms: &[f64], objectives: Objectives) -> Vec<f64> {
    trs.iter()
        .zip(cms)
        .map(|(&t, &c)| match objectives {
            Objectives::Both => (t + c) / 2.0,
            Objectives::TaskRelevanceOnly => t,
            Objectives::CrossModalOnly => c,
        })
        .collect()
}

/// Every segment inherits its step's value.
pub fn propagate_to_segments(steps: &[Step], values: &[f64], n_segments: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_segments];
    for (step, &v) in steps.iter().zip(values) {
        for &i in &step.segment_indices {
            out[i] = v;
        }
    }
    out
}

/// Greedy whole-step selection: steps in descending importance (earlier
/// start first on ties) are added until their frames reach `t%` of
/// `total_frames`. At least one step is always selected.
pub fn select_steps(
    step_frames: &[usize],
    step_starts: &[usize],
    importance: &[f64],
    t_percent: f64,
    total_frames: usize,
) -> Vec<bool> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance[b]
            .partial_cmp(&importance[a])
            .unwrap_or(Ordering::Equal)
            .then(step_starts[a].cmp(&step_starts[b]))
    });
    let budget = t_percent / 100.0 * total_frames as f64;
    let mut selected = vec![false; importance.len()];
    let mut covered = 0usize;
    for k in order {
        if covered > 0 && covered as f64 >= budget {
            break;
        }
        selected[k] = true;
        covered += step_frames[k];
    }
    selected
}

/// Builds the pseudo-summary track for one video from per-step importance.
/// Returns the track and the per-step selection flags.
pub fn select_top_t(
    steps: &[Step],
    importance: &[f64],
    config: &SelectionConfig,
    video: &EmbeddedVideo,
) -> (ScoreTrack, Vec<bool>) {
    let frames: Vec<usize> = steps.iter().map(|s| s.len() * video.segment_len).collect();
    let starts: Vec<usize> = steps.iter().map(Step::start).collect();
    let selected = select_steps(
        &frames,
        &starts,
        importance,
        config.t_percent,
        video.summarizable_frames(),
    );
    let seg_importance = propagate_to_segments(steps, importance, video.n_segments());
    let mut seg_selected = vec![false; video.n_segments()];
    for (step, _) in steps.iter().zip(&selected).filter(|(_, &sel)| sel) {
        for &i in &step.segment_indices {
            seg_selected[i] = true;
        }
    }
    let track = ScoreTrack::from_segment_selection(
        video.video_id.clone(),
        &rescale_unit(&seg_importance),
        &seg_selected,
        video.segment_len,
        video.n_frames,
    );
    (track, selected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step_id: usize,
    pub segment_indices: Vec<usize>,
    pub trs: f64,
    pub cms: f64,
    pub importance: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub no_transcript: bool,
    pub steps: Vec<StepReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub videos: Vec<VideoReport>,
}

#[derive(Debug, Clone)]
pub struct VideoPseudo {
    pub steps: Vec<Step>,
    pub scores: Vec<StepScores>,
    pub track: ScoreTrack,
    /// Per-step selection flags.
    pub selected: Vec<bool>,
    pub no_transcript: bool,
}

#[derive(Debug, Clone)]
pub struct TaskPseudo {
    pub task_id: String,
    pub videos: Vec<VideoPseudo>,
}

impl TaskPseudo {
    pub fn report(&self) -> TaskReport {
        TaskReport {
            task_id: self.task_id.clone(),
            videos: self
                .videos
                .iter()
                .map(|v| VideoReport {
                    video_id: v.track.video_id.clone(),
                    no_transcript: v.no_transcript,
                    steps: v
                        .steps
                        .iter()
                        .zip(&v.scores)
                        .map(|(s, sc)| StepReport {
                            step_id: s.step_id,
                            segment_indices: s.segment_indices.clone(),
                            trs: sc.trs,
                            cms: sc.cms,
                            importance: sc.importance,
                            selected: v.selected[s.step_id],
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Runs the full pseudo-summary pipeline over one task.
pub fn generate_for_task(group: &TaskGroup, config: &PseudoConfig) -> Result<TaskPseudo> {
    config.selection.validate()?;
    let steps_by_video: Vec<Vec<Step>> = group
        .videos
        .iter()
        .map(|v| group_into_steps(v, config.merge_mode))
        .collect::<Result<_>>()?;
    let trs = task_relevance(&steps_by_video)?;
    let mut videos = Vec::with_capacity(group.videos.len());
    for ((video, steps), trs) in group.videos.iter().zip(steps_by_video).zip(trs) {
        let (cms, no_transcript) = cross_modal(&steps, &video.transcript)?;
        let imp = importance(&trs, &cms, config.objectives);
        let (track, selected) = select_top_t(&steps, &imp, &config.selection, video);
        let scores = trs
            .iter()
            .zip(&cms)
            .zip(&imp)
            .map(|((&trs, &cms), &importance)| StepScores { trs, cms, importance })
            .collect();
        videos.push(VideoPseudo {
            steps,
            scores,
            track,
            selected,
            no_transcript,
        });
    }
    Ok(TaskPseudo {
        task_id: group.task_id.clone(),
        videos,
    })
}
