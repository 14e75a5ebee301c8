//! Reference summaries built from step illustrations.
//!
//! Each step asset (an image, or the first frame of a clip) is matched to
//! its most similar video frame. Images claim a window of +-2.5 s around the
//! match; clips claim their own length starting at the match. The union of
//! the windows gives the frame labels and each segment's importance is the
//! mean of its frame labels.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_emb, read_json, EmbeddedVideo, ScoreTrack};
use crate::vecmath::{dot, normalized};
use crate::{Error, Result};

/// Half-width of the window claimed by an image asset.
pub const IMAGE_HALF_WINDOW_S: f64 = 2.5;
/// Matches below this normalized similarity are treated as unlocalizable.
pub const SIMILARITY_FLOOR: f64 = 0.5;
/// Summaries covering less than this fraction of the video are flagged.
pub const MIN_COVERAGE: f64 = 0.30;
/// Summaries covering more than this fraction of the video are flagged.
pub const MAX_COVERAGE: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Image,
    Clip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepAsset {
    pub step_id: usize,
    pub kind: AssetKind,
    /// The image's feature, or the clip's first frame.
    pub feature: Vec<f32>,
    pub clip_len_s: Option<f64>,
    pub description: Option<String>,
}

impl StepAsset {
    pub fn validate(&self) -> Result<()> {
        if self.kind == AssetKind::Clip && !self.clip_len_s.is_some_and(|l| l > 0.0) {
            return Err(Error::Invalid(format!(
                "step {}: clips need a positive clip_len_s",
                self.step_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub matched_frame: usize,
    pub similarity: f64,
    /// `[start, end)` in frames.
    pub start: usize,
    pub end: usize,
}

/// Matches an asset to its most similar frame (earliest on ties) and
/// expands the match to a frame interval clamped to the video.
pub fn localize_asset(asset: &StepAsset, frame_features: &Array2<f32>, fps: f64) -> Result<Localization> {
    asset.validate()?;
    let n = frame_features.nrows();
    if n == 0 {
        return Err(Error::Invalid("no frame features to localize against".into()));
    }
    if frame_features.ncols() != asset.feature.len() {
        return Err(Error::LengthMismatch {
            expected: frame_features.ncols(),
            found: asset.feature.len(),
        });
    }
    let query = normalized(&asset.feature, || format!("asset for step {}", asset.step_id))?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, row) in frame_features.rows().into_iter().enumerate() {
        let row: Vec<f32> = row.to_vec();
        let sim = match normalized(&row, String::new) {
            Ok(unit) => dot(&query, &unit),
            Err(_) => continue,
        };
        if sim > best.1 {
            best = (i, sim);
        }
    }
    let (center, similarity) = best;
    let (start, end) = match asset.kind {
        AssetKind::Image => {
            let half = (IMAGE_HALF_WINDOW_S * fps).round() as usize;
            (center.saturating_sub(half), (center + half).min(n))
        }
        AssetKind::Clip => {
            let len = (asset.clip_len_s.unwrap_or(0.0) * fps).round().max(1.0) as usize;
            (center, (center + len).min(n))
        }
    };
    Ok(Localization {
        matched_frame: center,
        similarity,
        start,
        end,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInterval {
    pub step_id: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub video_id: String,
    pub frame_labels: Vec<u8>,
    /// Mean of each segment's frame labels.
    pub segment_scores: Vec<f64>,
    pub step_intervals: Vec<StepInterval>,
    /// Assets whose best match fell below the similarity floor.
    pub unlocalized: Vec<usize>,
}

impl GroundTruth {
    pub fn track(&self, segment_len: usize) -> ScoreTrack {
        // Computed in f32 directly so the stored scores are exact label means.
        let segment_scores = self
            .frame_labels
            .chunks_exact(segment_len)
            .take(self.segment_scores.len())
            .map(|c| c.iter().map(|&l| f32::from(l)).sum::<f32>() / segment_len as f32)
            .collect();
        ScoreTrack {
            video_id: self.video_id.clone(),
            segment_scores,
            frame_labels: self.frame_labels.clone(),
        }
    }

    pub fn no_match(&self) -> bool {
        self.step_intervals.is_empty()
    }

    pub fn intervals_file(&self) -> IntervalsFile {
        IntervalsFile {
            video_id: self.video_id.clone(),
            n_frames: self.frame_labels.len(),
            steps: self.step_intervals.clone(),
        }
    }
}

pub fn build_ground_truth(video: &EmbeddedVideo, assets: &[StepAsset]) -> Result<GroundTruth> {
    if assets.is_empty() {
        return Err(Error::Invalid(format!("video {}: no step assets", video.video_id)));
    }
    let ff = video.frame_features.as_ref().ok_or_else(|| {
        Error::Invalid(format!("video {}: frame features are required", video.video_id))
    })?;
    let mut frame_labels = vec![0u8; video.n_frames];
    let mut step_intervals = Vec::new();
    let mut unlocalized = Vec::new();
    for asset in assets {
        let loc = localize_asset(asset, ff, video.fps)?;
        if loc.similarity < SIMILARITY_FLOOR {
            log::warn!(
                "video {}: step {} best match {:.3} is below the similarity floor",
                video.video_id,
                asset.step_id,
                loc.similarity
            );
            unlocalized.push(asset.step_id);
            continue;
        }
        frame_labels[loc.start..loc.end].fill(1);
        step_intervals.push(StepInterval {
            step_id: asset.step_id,
            start: loc.start,
            end: loc.end,
        });
    }
    let segment_scores = frame_labels
        .chunks_exact(video.segment_len)
        .take(video.n_segments())
        .map(|c| c.iter().map(|&l| f64::from(l)).sum::<f64>() / video.segment_len as f64)
        .collect();
    Ok(GroundTruth {
        video_id: video.video_id.clone(),
        frame_labels,
        segment_scores,
        step_intervals,
        unlocalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub video_id: String,
    pub coverage: f64,
    pub too_short: bool,
    pub too_long: bool,
    pub no_match: bool,
    pub unlocalized_steps: Vec<usize>,
}

impl VerificationReport {
    pub fn needs_review(&self) -> bool {
        self.too_short || self.too_long || self.no_match || !self.unlocalized_steps.is_empty()
    }
}

/// Flags summaries that are implausibly short or long. Nothing is corrected.
pub fn verify_lengths(gt: &GroundTruth) -> VerificationReport {
    let n = gt.frame_labels.len().max(1);
    let ones = gt.frame_labels.iter().filter(|&&l| l == 1).count();
    let coverage = ones as f64 / n as f64;
    VerificationReport {
        video_id: gt.video_id.clone(),
        coverage,
        too_short: coverage < MIN_COVERAGE,
        too_long: coverage > MAX_COVERAGE,
        no_match: gt.no_match(),
        unlocalized_steps: gt.unlocalized.clone(),
    }
}

/// Per-step frame intervals of a reference summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalsFile {
    pub video_id: String,
    pub n_frames: usize,
    pub steps: Vec<StepInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub step_id: usize,
    pub kind: AssetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_len_s: Option<f64>,
    pub feature_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Asset manifest for one video; `feature_row` indexes the companion `.emb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetsFile {
    pub video_id: String,
    pub steps: Vec<AssetEntry>,
}

impl AssetsFile {
    pub fn from_assets(video_id: &str, assets: &[StepAsset]) -> (Self, Array2<f32>) {
        let dim = assets.first().map_or(0, |a| a.feature.len());
        let flat: Vec<f32> = assets.iter().flat_map(|a| a.feature.iter().copied()).collect();
        let features = Array2::from_shape_vec((assets.len(), dim), flat).expect("uniform features");
        let steps = assets
            .iter()
            .enumerate()
            .map(|(row, a)| AssetEntry {
                step_id: a.step_id,
                kind: a.kind,
                clip_len_s: a.clip_len_s,
                feature_row: row,
                description: a.description.clone(),
            })
            .collect();
        (
            AssetsFile {
                video_id: video_id.to_owned(),
                steps,
            },
            features,
        )
    }
}

/// Reads an assets JSON file and its companion `.emb` (same stem).
pub fn read_assets(path: &Path) -> Result<(String, Vec<StepAsset>)> {
    let file: AssetsFile = read_json(path)?;
    let features = read_emb(&path.with_extension("emb"))?;
    let assets = file
        .steps
        .into_iter()
        .map(|e| {
            if e.feature_row >= features.nrows() {
                return Err(Error::Invalid(format!(
                    "{}: feature_row {} out of range",
                    path.display(),
                    e.feature_row
                )));
            }
            let asset = StepAsset {
                step_id: e.step_id,
                kind: e.kind,
                feature: features.row(e.feature_row).to_vec(),
                clip_len_s: e.clip_len_s,
                description: e.description,
            };
            asset.validate()?;
            Ok(asset)
        })
        .collect::<Result<_>>()?;
    Ok((file.video_id, assets))
}
