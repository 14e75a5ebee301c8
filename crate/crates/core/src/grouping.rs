//! Unsupervised step discovery: adjacent segments are merged into steps when
//! their embeddings are similar enough.
//!
//! All similarities are dot products of L2-normalized vectors, so the merge
//! threshold (90% of the largest similarity between two distinct segments)
//! does not depend on the embedding scale.

use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddedVideo;
use crate::vecmath::{dot, mean, norm, normalized, normalized_f64};
use crate::Result;

/// Fraction of the maximum off-diagonal similarity used as merge threshold.
pub const THRESHOLD_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// Compare each segment with the renormalized mean of the open step.
    #[default]
    RunningMean,
    /// Compare each segment with the segment immediately before it.
    PrevSegment,
}

impl std::str::FromStr for MergeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "running_mean" => Ok(MergeMode::RunningMean),
            "prev_segment" => Ok(MergeMode::PrevSegment),
            other => Err(format!("unknown merge mode {other:?} (running_mean | prev_segment)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub step_id: usize,
    pub video_id: String,
    /// Contiguous, ascending.
    pub segment_indices: Vec<usize>,
    /// Renormalized mean of the member segments' unit vectors.
    pub vec: Vec<f64>,
}

impl Step {
    pub fn start(&self) -> usize {
        self.segment_indices[0]
    }

    pub fn len(&self) -> usize {
        self.segment_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_indices.is_empty()
    }
}

/// Unit segment vectors plus their raw norms (kept for diagnostics).
#[derive(Debug, Clone)]
pub struct UnitSegments {
    pub vecs: Vec<Vec<f64>>,
    pub raw_norms: Vec<f64>,
}

pub fn unit_segments(video: &EmbeddedVideo) -> Result<UnitSegments> {
    let mut vecs = Vec::with_capacity(video.n_segments());
    let mut raw_norms = Vec::with_capacity(video.n_segments());
    for s in &video.segments {
        let wide: Vec<f64> = s.vec.iter().map(|&x| f64::from(x)).collect();
        raw_norms.push(norm(&wide));
        vecs.push(normalized(&s.vec, || {
            format!("video {} segment {}", video.video_id, s.index)
        })?);
    }
    Ok(UnitSegments { vecs, raw_norms })
}

/// `M[i][j] = ŝ_i · ŝ_j` over unit segment vectors.
pub fn pairwise_similarity(video: &EmbeddedVideo) -> Result<Vec<Vec<f64>>> {
    Ok(similarity_matrix(&unit_segments(video)?.vecs))
}

pub fn similarity_matrix(units: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = units.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = dot(&units[i], &units[i]);
        for j in i + 1..n {
            let s = dot(&units[i], &units[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}

/// 90% of the largest similarity between two distinct segments. A single
/// segment yields `+inf`: nothing can merge.
pub fn merge_threshold(sim: &[Vec<f64>]) -> f64 {
    let n = sim.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut max = f64::NEG_INFINITY;
    for (i, row) in sim.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            if i != j {
                max = max.max(s);
            }
        }
    }
    THRESHOLD_FRACTION * max
}

/// Left-to-right merge of adjacent segments into steps.
pub fn group_into_steps(video: &EmbeddedVideo, mode: MergeMode) -> Result<Vec<Step>> {
    let units = unit_segments(video)?.vecs;
    let threshold = merge_threshold(&similarity_matrix(&units));
    let dim = video.dim();

    let mut runs: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = vec![0];
    let mut step_vec = units[0].clone();
    for i in 1..units.len() {
        let reference = match mode {
            MergeMode::RunningMean => &step_vec,
            MergeMode::PrevSegment => &units[i - 1],
        };
        if dot(&units[i], reference) > threshold {
            current.push(i);
            if mode == MergeMode::RunningMean {
                step_vec = member_mean(&units, &current, dim)?;
            }
        } else {
            runs.push(std::mem::replace(&mut current, vec![i]));
            step_vec = units[i].clone();
        }
    }
    runs.push(current);

    runs.into_iter()
        .enumerate()
        .map(|(step_id, segment_indices)| {
            let vec = member_mean(&units, &segment_indices, dim)?;
            Ok(Step {
                step_id,
                video_id: video.video_id.clone(),
                segment_indices,
                vec,
            })
        })
        .collect()
}

fn member_mean(units: &[Vec<f64>], members: &[usize], dim: usize) -> Result<Vec<f64>> {
    let m = mean(members.iter().map(|&i| units[i].as_slice()), dim);
    // Antipodal members can cancel; fall back to the first member's direction.
    normalized_f64(m, || "step mean".into()).or_else(|_| Ok(units[members[0]].clone()))
}

/// Debug dump entry: one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDump {
    pub step_id: usize,
    pub segment_indices: Vec<usize>,
}

pub fn dump_steps(steps: &[Step]) -> Vec<StepDump> {
    steps
        .iter()
        .map(|s| StepDump {
            step_id: s.step_id,
            segment_indices: s.segment_indices.clone(),
        })
        .collect()
}
