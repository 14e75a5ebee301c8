//! Deterministic synthetic corpora with planted structure.
//!
//! Each task owns a set of shared step prototypes that appear in every one of
//! its videos; each video additionally gets its own distractor prototypes.
//! A video is a random ordering of these steps laid out as contiguous runs of
//! segments, every segment being its step's prototype plus Gaussian noise.
//! Shared steps are mentioned in the transcript with probability
//! `mention_prob`, one sentence per mentioned step.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedVideo, ScoreTrack, TaskGroup, TranscriptSentence};
use crate::gt::{AssetKind, StepAsset};
use crate::{Error, Result};

/// Prototypes are redrawn until every pairwise |cos| is below this.
pub const MAX_PROTOTYPE_COS: f64 = 0.3;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_tasks: usize,
    pub videos_per_task: usize,
    pub segments_per_video: usize,
    /// Embedding width. Per-component noise grows with it while chance
    /// prototype correlation shrinks; the default balances the two.
    pub dim: usize,
    pub shared_steps_per_task: usize,
    pub distractors_per_video: usize,
    pub mention_prob: f64,
    /// Per-component standard deviation of segment and sentence noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Extra videos per task drawn from the same prototypes, kept apart from
    /// the main corpus. Adding them does not change the main corpus.
    pub holdout_per_task: usize,
    /// Also emit per-frame features (same space as segments and sentences).
    pub frame_features: bool,
    /// Per-component noise of frame features, drawn once per segment:
    /// neighbouring frames look alike, so their errors are shared. Single
    /// images are a weaker signal than clips, hence the larger default.
    pub frame_noise_sigma: f64,
    /// Additional independent per-frame noise.
    pub frame_jitter_sigma: f64,
    pub fps: f64,
    pub segment_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tasks: 3,
            videos_per_task: 6,
            segments_per_video: 24,
            dim: 192,
            shared_steps_per_task: 5,
            distractors_per_video: 3,
            mention_prob: 1.0,
            noise_sigma: 0.05,
            seed: 7,
            holdout_per_task: 0,
            frame_features: false,
            frame_noise_sigma: 0.2,
            frame_jitter_sigma: 0.01,
            fps: 8.0,
            segment_len: 32,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let steps = self.shared_steps_per_task + self.distractors_per_video;
        if steps == 0 {
            return Err(Error::Config("a video needs at least one planted step".into()));
        }
        if steps > self.segments_per_video {
            return Err(Error::Config(format!(
                "{steps} planted steps cannot fit into {} segments",
                self.segments_per_video
            )));
        }
        if self.dim < 8 {
            return Err(Error::Config(format!("dim must be at least 8, got {}", self.dim)));
        }
        if self.n_tasks == 0 || self.videos_per_task == 0 || self.segment_len == 0 {
            return Err(Error::Config(
                "n_tasks, videos_per_task and segment_len must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mention_prob) {
            return Err(Error::Config(format!(
                "mention_prob must lie in [0, 1], got {}",
                self.mention_prob
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.frame_noise_sigma >= 0.0 && self.frame_jitter_sigma >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedStep {
    pub prototype: String,
    pub segment_indices: Vec<usize>,
    pub shared_across_task: bool,
    pub mentioned_in_transcript: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVideo {
    pub video_id: String,
    pub task_id: String,
    pub held_out: bool,
    /// In temporal order.
    pub steps: Vec<PlantedStep>,
}

impl PlantedVideo {
    /// Reference summary: every frame of a shared step is labeled 1; segment
    /// scores are 1 for shared steps and 0 otherwise.
    pub fn shared_track(&self, segment_len: usize, n_frames: usize) -> ScoreTrack {
        let n_segments = self.steps.iter().map(|s| s.segment_indices.len()).sum();
        let mut scores = vec![0.0; n_segments];
        let mut selected = vec![false; n_segments];
        for s in self.steps.iter().filter(|s| s.shared_across_task) {
            for &i in &s.segment_indices {
                scores[i] = 1.0;
                selected[i] = true;
            }
        }
        ScoreTrack::from_segment_selection(self.video_id.clone(), &scores, &selected, segment_len, n_frames)
    }

    /// Frame intervals `[start, end)` of the shared steps.
    pub fn shared_intervals(&self, segment_len: usize) -> Vec<(usize, usize)> {
        self.steps
            .iter()
            .filter(|s| s.shared_across_task)
            .map(|s| step_frames(s, segment_len))
            .collect()
    }
}

fn step_frames(step: &PlantedStep, segment_len: usize) -> (usize, usize) {
    let first = step.segment_indices[0];
    let last = *step.segment_indices.last().unwrap();
    (first * segment_len, (last + 1) * segment_len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub videos: Vec<PlantedVideo>,
}

impl PlantedTruth {
    pub fn video(&self, video_id: &str) -> Option<&PlantedVideo> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub groups: Vec<TaskGroup>,
    /// Same tasks, held-out videos only; empty groups when `holdout_per_task == 0`.
    pub holdout: Vec<TaskGroup>,
    pub truth: PlantedTruth,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Draws a unit vector with |cos| below the limit against all of `existing`.
fn draw_prototype(rng: &mut ChaCha8Rng, dim: usize, existing: &[Vec<f64>]) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTIONS {
        let candidate = unit(gaussian(rng, dim, 1.0));
        let ok = existing.iter().all(|e| {
            let c: f64 = e.iter().zip(&candidate).map(|(a, b)| a * b).sum();
            c.abs() < MAX_PROTOTYPE_COS
        });
        if ok {
            return Ok(candidate);
        }
    }
    Err(Error::Config(format!(
        "could not draw {} near-orthogonal prototypes in dimension {dim}",
        existing.len() + 1
    )))
}

/// Noisy copy of `proto`, renormalized; exact copy when `sigma == 0`.
fn noisy(rng: &mut ChaCha8Rng, proto: &[f64], sigma: f64) -> Vec<f32> {
    if sigma == 0.0 {
        return to_f32(proto);
    }
    let noise = gaussian(rng, proto.len(), sigma);
    to_f32(&unit(proto.iter().zip(noise).map(|(p, n)| p + n).collect()))
}

/// Splits `n` into `k` near-equal run lengths; the larger runs land on
/// randomly chosen positions.
fn run_lengths(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut lengths = vec![n / k; k];
    let mut slots: Vec<usize> = (0..k).collect();
    slots.shuffle(rng);
    for &s in slots.iter().take(n % k) {
        lengths[s] += 1;
    }
    lengths
}

struct VideoSpec<'a> {
    video_id: String,
    task_id: &'a str,
    held_out: bool,
}

fn generate_video(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    spec: VideoSpec<'_>,
    shared: &[(String, Vec<f64>)],
) -> Result<(EmbeddedVideo, PlantedVideo)> {
    let mut existing: Vec<Vec<f64>> = shared.iter().map(|(_, p)| p.clone()).collect();
    let mut steps: Vec<(String, Vec<f64>, bool)> =
        shared.iter().map(|(id, p)| (id.clone(), p.clone(), true)).collect();
    for d in 0..config.distractors_per_video {
        let p = draw_prototype(rng, config.dim, &existing)?;
        existing.push(p.clone());
        steps.push((format!("{}-d{d}", spec.video_id), p, false));
    }
    steps.shuffle(rng);
    let lengths = run_lengths(rng, config.segments_per_video, steps.len());

    let seg_len = config.segment_len;
    let n_frames = config.segments_per_video * seg_len;
    let mut rows = Vec::with_capacity(config.segments_per_video * config.dim);
    let mut frames = config
        .frame_features
        .then(|| Vec::with_capacity(n_frames * config.dim));
    let mut planted = Vec::with_capacity(steps.len());
    let mut sentences = Vec::new();
    let mut next = 0usize;
    for ((prototype, proto, shared_step), len) in steps.into_iter().zip(lengths) {
        let segment_indices: Vec<usize> = (next..next + len).collect();
        next += len;
        for _ in 0..len {
            rows.extend(noisy(rng, &proto, config.noise_sigma));
        }
        if let Some(frames) = frames.as_mut() {
            for _ in 0..len {
                let shot = unit(
                    proto
                        .iter()
                        .zip(gaussian(rng, proto.len(), config.frame_noise_sigma))
                        .map(|(p, n)| p + n)
                        .collect(),
                );
                for _ in 0..seg_len {
                    frames.extend(noisy(rng, &shot, config.frame_jitter_sigma));
                }
            }
        }
        let mentioned = shared_step && rng.random::<f64>() < config.mention_prob;
        if mentioned {
            let a = segment_indices[0] as f64 * seg_len as f64 / config.fps;
            let b = (segment_indices[0] + len) as f64 * seg_len as f64 / config.fps;
            sentences.push(TranscriptSentence {
                start_s: a + 0.25 * (b - a),
                end_s: a + 0.75 * (b - a),
                text: format!("step {prototype}"),
                vec: noisy(rng, &proto, config.noise_sigma),
            });
        }
        planted.push(PlantedStep {
            prototype,
            segment_indices,
            shared_across_task: shared_step,
            mentioned_in_transcript: mentioned,
        });
    }

    let matrix = Array2::from_shape_vec((config.segments_per_video, config.dim), rows)
        .expect("row count fixed by config");
    let mut video = EmbeddedVideo::from_segment_matrix(
        spec.video_id.clone(),
        spec.task_id,
        config.fps,
        n_frames,
        seg_len,
        &matrix,
    )?;
    video.frame_features =
        frames.map(|f| Array2::from_shape_vec((n_frames, config.dim), f).expect("frame count"));
    video.transcript = sentences;
    Ok((
        video,
        PlantedVideo {
            video_id: spec.video_id,
            task_id: spec.task_id.to_owned(),
            held_out: spec.held_out,
            steps: planted,
        },
    ))
}

/// Generates a corpus; deterministic in `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut groups = Vec::with_capacity(config.n_tasks);
    let mut holdout = Vec::with_capacity(config.n_tasks);
    let mut truth = Vec::new();
    let mut held_truth = Vec::new();
    for t in 0..config.n_tasks {
        // One independent stream per task.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(t as u64);
        let task_id = format!("task{t}");
        let mut shared: Vec<(String, Vec<f64>)> = Vec::new();
        for k in 0..config.shared_steps_per_task {
            let existing: Vec<Vec<f64>> = shared.iter().map(|(_, p)| p.clone()).collect();
            let p = draw_prototype(&mut rng, config.dim, &existing)?;
            shared.push((format!("{task_id}-s{k}"), p));
        }
        let mut videos = Vec::new();
        for v in 0..config.videos_per_task {
            let spec = VideoSpec {
                video_id: format!("{task_id}_vid{v}"),
                task_id: &task_id,
                held_out: false,
            };
            let (video, planted) = generate_video(&mut rng, config, spec, &shared)?;
            videos.push(video);
            truth.push(planted);
        }
        let mut held = Vec::new();
        for v in 0..config.holdout_per_task {
            let spec = VideoSpec {
                video_id: format!("{task_id}_held{v}"),
                task_id: &task_id,
                held_out: true,
            };
            let (video, planted) = generate_video(&mut rng, config, spec, &shared)?;
            held.push(video);
            held_truth.push(planted);
        }
        groups.push(TaskGroup {
            task_id: task_id.clone(),
            videos,
        });
        holdout.push(TaskGroup { task_id, videos: held });
    }
    truth.extend(held_truth);
    Ok(SynthCorpus {
        groups,
        holdout,
        truth: PlantedTruth { videos: truth },
    })
}

/// One image asset per shared step whose feature is an exact copy of the
/// step's middle frame. Requires frame features.
pub fn shared_step_assets(video: &EmbeddedVideo, planted: &PlantedVideo) -> Result<Vec<StepAsset>> {
    let ff = video.frame_features.as_ref().ok_or_else(|| {
        Error::Invalid(format!("video {}: no frame features", video.video_id))
    })?;
    Ok(planted
        .steps
        .iter()
        .filter(|s| s.shared_across_task)
        .enumerate()
        .map(|(step_id, s)| {
            let (a, b) = step_frames(s, video.segment_len);
            StepAsset {
                step_id,
                kind: AssetKind::Image,
                feature: ff.row((a + b) / 2).to_vec(),
                clip_len_s: None,
                description: Some(s.prototype.clone()),
            }
        })
        .collect())
}
