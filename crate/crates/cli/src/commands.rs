use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use ivsum::baselines::{run_baseline, BaselineKind};
use ivsum::corpus::{
    read_corpus, read_json, read_track_dir, track_file_name, write_corpus, write_json, write_score_track,
    EmbeddedVideo, ScoreTrack, TaskGroup,
};
use ivsum::eval::evaluate_corpus;
use ivsum::gt::{build_ground_truth, read_assets, verify_lengths, AssetsFile, IntervalsFile, StepInterval};
use ivsum::pseudo::generate_for_task;
use ivsum::scorer::{build_examples, evaluation_mse, infer, read_checkpoint, train, write_checkpoint};
use ivsum::synth::{generate, shared_step_assets, PlantedTruth};

use crate::config::RunConfig;
use crate::record::InputDigest;

pub const CHECKPOINT_FILE: &str = "scorer.ivsp";

#[derive(Debug, Clone)]
pub enum Command {
    Synth { out: PathBuf },
    PseudoGen { manifest: PathBuf, out: PathBuf },
    Train { manifest: PathBuf, pseudo: PathBuf, out: PathBuf },
    Infer { manifest: PathBuf, checkpoint: PathBuf, out: PathBuf },
    Baseline { manifest: PathBuf, kind: BaselineKind, out: PathBuf },
    GtBuild { manifest: PathBuf, assets: PathBuf, out: PathBuf },
    Eval { pred: PathBuf, gt: PathBuf, intervals: Option<PathBuf>, step_recall: bool, out: PathBuf },
}

fn intervals_name(video_id: &str) -> String {
    format!("{video_id}.intervals.json")
}

fn assets_name(video_id: &str) -> String {
    format!("{video_id}.assets.json")
}

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("input directory {} does not exist", path.display());
    }
    Ok(())
}

fn create_out(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn write_tracks(out: &Path, tracks: &[ScoreTrack]) -> anyhow::Result<()> {
    for t in tracks {
        write_score_track(t, &out.join(track_file_name(&t.video_id)))?;
    }
    Ok(())
}

fn all_videos(groups: &[TaskGroup]) -> Vec<&EmbeddedVideo> {
    groups.iter().flat_map(|g| &g.videos).collect()
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::PseudoGen { .. } => "pseudo-gen",
            Command::Train { .. } => "train",
            Command::Infer { .. } => "infer",
            Command::Baseline { .. } => "baseline",
            Command::GtBuild { .. } => "gt-build",
            Command::Eval { .. } => "eval",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Command::Synth { out }
            | Command::PseudoGen { out, .. }
            | Command::Train { out, .. }
            | Command::Infer { out, .. }
            | Command::Baseline { out, .. }
            | Command::GtBuild { out, .. }
            | Command::Eval { out, .. } => out,
        }
    }

    /// Checks that inputs exist and digests them; runs before any work.
    pub fn inputs(&self) -> anyhow::Result<BTreeMap<String, InputDigest>> {
        let mut d = BTreeMap::new();
        let manifest = |d: &mut BTreeMap<String, InputDigest>, m: &Path| -> anyhow::Result<()> {
            require_file(m)?;
            d.insert("manifest".into(), InputDigest::manifest(m)?);
            Ok(())
        };
        match self {
            Command::Synth { .. } => {}
            Command::PseudoGen { manifest: m, .. } => manifest(&mut d, m)?,
            Command::Train { manifest: m, pseudo, .. } => {
                manifest(&mut d, m)?;
                require_dir(pseudo)?;
                d.insert("pseudo".into(), InputDigest::dir(pseudo)?);
            }
            Command::Infer { manifest: m, checkpoint, .. } => {
                manifest(&mut d, m)?;
                require_file(checkpoint)?;
                d.insert("checkpoint".into(), InputDigest::file(checkpoint)?);
            }
            Command::Baseline { manifest: m, .. } => manifest(&mut d, m)?,
            Command::GtBuild { manifest: m, assets, .. } => {
                manifest(&mut d, m)?;
                require_dir(assets)?;
                let listed = ivsum::corpus::Manifest::read(m)?;
                for v in &listed.videos {
                    require_file(&assets.join(assets_name(&v.video_id)))?;
                }
                d.insert("assets".into(), InputDigest::dir(assets)?);
            }
            Command::Eval { pred, gt, intervals, .. } => {
                require_dir(pred)?;
                require_dir(gt)?;
                d.insert("pred".into(), InputDigest::dir(pred)?);
                d.insert("gt".into(), InputDigest::dir(gt)?);
                if let Some(iv) = intervals {
                    require_dir(iv)?;
                    d.insert("intervals".into(), InputDigest::dir(iv)?);
                }
            }
        }
        Ok(d)
    }

    pub fn run(&self, config: &RunConfig) -> anyhow::Result<()> {
        create_out(self.out())?;
        match self {
            Command::Synth { out } => synth(config, out),
            Command::PseudoGen { manifest, out } => pseudo_gen(config, manifest, out),
            Command::Train { manifest, pseudo, out } => train_cmd(config, manifest, pseudo, out),
            Command::Infer { manifest, checkpoint, out } => infer_cmd(config, manifest, checkpoint, out),
            Command::Baseline { manifest, kind, out } => baseline(config, manifest, *kind, out),
            Command::GtBuild { manifest, assets, out } => gt_build(manifest, assets, out),
            Command::Eval { pred, gt, intervals, step_recall, out } => {
                let intervals = step_recall.then(|| intervals.as_deref().unwrap_or(gt));
                eval(config, pred, gt, intervals, out)
            }
        }
    }
}

/// Writes one split of a synthetic corpus: tensors and manifest, planted
/// reference tracks and intervals under `gt/`, and image assets under
/// `assets/` when frame features exist.
fn write_split(dir: &Path, groups: &[TaskGroup], truth: &PlantedTruth) -> anyhow::Result<()> {
    write_corpus(dir, groups, true)?;
    let gt_dir = dir.join("gt");
    create_out(&gt_dir)?;
    let with_assets = all_videos(groups).iter().any(|v| v.frame_features.is_some());
    let assets_dir = dir.join("assets");
    if with_assets {
        create_out(&assets_dir)?;
    }
    for v in all_videos(groups) {
        let planted = truth
            .video(&v.video_id)
            .with_context(|| format!("no planted truth for {}", v.video_id))?;
        write_score_track(&planted.shared_track(v.segment_len, v.n_frames), &gt_dir.join(track_file_name(&v.video_id)))?;
        let intervals = IntervalsFile {
            video_id: v.video_id.clone(),
            n_frames: v.n_frames,
            steps: planted
                .shared_intervals(v.segment_len)
                .into_iter()
                .enumerate()
                .map(|(step_id, (start, end))| StepInterval { step_id, start, end })
                .collect(),
        };
        write_json(&gt_dir.join(intervals_name(&v.video_id)), &intervals)?;
        if with_assets {
            let assets = shared_step_assets(v, planted)?;
            let (file, features) = AssetsFile::from_assets(&v.video_id, &assets);
            let path = assets_dir.join(assets_name(&v.video_id));
            write_json(&path, &file)?;
            ivsum::corpus::write_emb(&path.with_extension("emb"), &features)?;
        }
    }
    let ids: Vec<&str> = all_videos(groups).iter().map(|v| v.video_id.as_str()).collect();
    let split_truth = PlantedTruth {
        videos: truth.videos.iter().filter(|p| ids.contains(&p.video_id.as_str())).cloned().collect(),
    };
    write_json(&dir.join("truth.json"), &split_truth)?;
    Ok(())
}

fn synth(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let corpus = generate(&config.synth)?;
    write_split(out, &corpus.groups, &corpus.truth)?;
    if config.synth.holdout_per_task > 0 {
        write_split(&out.join("holdout"), &corpus.holdout, &corpus.truth)?;
    }
    log::info!(
        "synthesized {} videos ({} held out)",
        all_videos(&corpus.groups).len(),
        all_videos(&corpus.holdout).len()
    );
    Ok(())
}

fn pseudo_gen(config: &RunConfig, manifest: &Path, out: &Path) -> anyhow::Result<()> {
    let groups = read_corpus(manifest)?;
    let pseudo = config.pseudo();
    let results = groups
        .par_iter()
        .map(|g| generate_for_task(g, &pseudo))
        .collect::<Result<Vec<_>, _>>()?;
    for task in &results {
        let tracks: Vec<ScoreTrack> = task.videos.iter().map(|v| v.track.clone()).collect();
        write_tracks(out, &tracks)?;
        write_json(&out.join(format!("report_{}.json", task.task_id)), &task.report())?;
        let missing = task.videos.iter().filter(|v| v.no_transcript).count();
        if missing > 0 {
            log::warn!("task {}: {missing} videos without transcript", task.task_id);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LossFile {
    epoch_losses: Vec<f64>,
    /// Evaluation-mode MSE over the full training videos.
    final_mse: f64,
    n_videos: usize,
    n_params: usize,
}

fn train_cmd(config: &RunConfig, manifest: &Path, pseudo: &Path, out: &Path) -> anyhow::Result<()> {
    let groups = read_corpus(manifest)?;
    let tracks = read_track_dir(pseudo)?;
    let examples = build_examples(&groups, &tracks, &config.scorer)?;
    log::info!("training on {} videos", examples.len());
    let outcome = train(&examples, &config.scorer, &config.train)?;
    let final_mse = evaluation_mse(&outcome.params, &config.scorer, &examples)?;
    write_checkpoint(&out.join(CHECKPOINT_FILE), &config.scorer, &outcome.params)?;
    write_json(
        &out.join("loss.json"),
        &LossFile {
            epoch_losses: outcome.epoch_losses,
            final_mse,
            n_videos: examples.len(),
            n_params: outcome.params.n_params(),
        },
    )?;
    Ok(())
}

fn infer_cmd(config: &RunConfig, manifest: &Path, checkpoint: &Path, out: &Path) -> anyhow::Result<()> {
    let groups = read_corpus(manifest)?;
    let (scorer, params) = read_checkpoint(checkpoint)?;
    if scorer.text_window_s != config.window_s || scorer.text_mode != config.text_mode {
        log::warn!("text context settings differ from the checkpoint's; using the checkpoint's");
    }
    let tracks = all_videos(&groups)
        .par_iter()
        .map(|v| infer(&params, &scorer, v, &v.transcript, config.t_percent))
        .collect::<Result<Vec<_>, _>>()?;
    write_tracks(out, &tracks)
}

fn baseline(config: &RunConfig, manifest: &Path, kind: BaselineKind, out: &Path) -> anyhow::Result<()> {
    let groups = read_corpus(manifest)?;
    let tracks = all_videos(&groups)
        .par_iter()
        .map(|v| run_baseline(kind, v, config.t_percent, config.merge_mode))
        .collect::<Result<Vec<_>, _>>()?;
    write_tracks(out, &tracks)
}

fn gt_build(manifest: &Path, assets: &Path, out: &Path) -> anyhow::Result<()> {
    let groups = read_corpus(manifest)?;
    let mut reports = Vec::new();
    for v in all_videos(&groups) {
        let (id, list) = read_assets(&assets.join(assets_name(&v.video_id)))?;
        if id != v.video_id {
            bail!("assets file for {} names video {id}", v.video_id);
        }
        let gt = build_ground_truth(v, &list)?;
        let report = verify_lengths(&gt);
        if report.needs_review() {
            log::warn!("video {} needs review", v.video_id);
        }
        write_score_track(&gt.track(v.segment_len), &out.join(track_file_name(&v.video_id)))?;
        write_json(&out.join(intervals_name(&v.video_id)), &gt.intervals_file())?;
        reports.push(report);
    }
    write_json(&out.join("review.json"), &reports)?;
    Ok(())
}

/// Reads `*.intervals.json` from `dir`, keyed by video id. Reference
/// intervals default to those stored beside the reference tracks.
fn read_intervals(dir: &Path) -> anyhow::Result<BTreeMap<String, Vec<StepInterval>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.ends_with(".intervals.json") {
            let f: IntervalsFile = read_json(&path)?;
            out.insert(f.video_id, f.steps);
        }
    }
    Ok(out)
}

fn eval(config: &RunConfig, pred: &Path, gt: &Path, intervals: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let pred_tracks = read_track_dir(pred)?;
    let gt_tracks = read_track_dir(gt)?;
    if gt_tracks.is_empty() {
        bail!("no reference tracks in {}", gt.display());
    }
    let iv = match intervals {
        Some(dir) => Some(read_intervals(dir)?).filter(|m| !m.is_empty()),
        None => None,
    };
    let report = evaluate_corpus(&pred_tracks, &gt_tracks, iv.as_ref(), config.step_recall_mode)?;
    write_json(&out.join("eval.json"), &report)?;
    let table = report.table();
    fs::write(out.join("table.txt"), &table).with_context(|| format!("writing {}", out.display()))?;
    print!("{table}");
    Ok(())
}
