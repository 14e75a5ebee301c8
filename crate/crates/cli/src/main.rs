//! `ivsum`: synthesize corpora, build pseudo summaries, train and apply the
//! segment scorer, run baselines, build references and evaluate.
//!
//! Exit status: 0 on success, 1 when arguments, configuration or inputs are
//! invalid (reported before any work starts), 2 when a run fails.

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ivsum::baselines::BaselineKind;
use ivsum::eval::StepRecallMode;
use ivsum::grouping::MergeMode;

use commands::Command;
use config::{Overrides, RunConfig, SynthOverrides};

#[derive(Parser, Debug)]
#[command(name = "ivsum", version, about = "Instructional video summarization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

/// Tunables shared by every subcommand; they override `--config`.
#[derive(Args, Debug)]
struct Common {
    /// JSON config file (defaults < file < flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice in the pipeline.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Summary budget in percent of the video.
    #[arg(long = "t", global = true, value_name = "PERCENT")]
    t_percent: Option<f64>,
    #[arg(long, global = true, value_name = "running_mean|prev_segment")]
    merge_mode: Option<MergeMode>,
    /// Seconds of transcript context on each side of a segment.
    #[arg(long, global = true)]
    window_s: Option<f64>,
    #[arg(long, global = true)]
    layers: Option<usize>,
    #[arg(long, global = true)]
    heads: Option<usize>,
    #[arg(long, global = true)]
    d_model: Option<usize>,
    #[arg(long, global = true)]
    max_segments: Option<usize>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    weight_decay: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Worker threads; 1 gives bit-reproducible runs (results do not depend
    /// on the count in any case).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic corpus with planted steps.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tasks: Option<usize>,
        #[arg(long)]
        videos_per_task: Option<usize>,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        shared_steps: Option<usize>,
        #[arg(long)]
        distractors: Option<usize>,
        #[arg(long)]
        mention_prob: Option<f64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Extra videos per task written under `<out>/holdout`.
        #[arg(long)]
        holdout_per_task: Option<usize>,
        /// Also emit frame features and per-step image assets.
        #[arg(long)]
        frame_features: bool,
    },
    /// Build pseudo-summary tracks and per-task reports.
    PseudoGen {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the scorer on pseudo-summary tracks.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of pseudo-summary tracks.
        #[arg(long)]
        pseudo: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score and summarize videos with a trained scorer.
    Infer {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an unsupervised cross-modal baseline.
    Baseline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_name = "frame|segment|step")]
        kind: BaselineKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize step assets into reference summaries.
    GtBuild {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `<video_id>.assets.json` files.
        #[arg(long)]
        assets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predicted tracks against reference tracks.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Reference step intervals (defaults to those beside the references).
        #[arg(long, conflicts_with = "no_step_recall")]
        intervals: Option<PathBuf>,
        /// Skip step recall even when intervals exist.
        #[arg(long)]
        no_step_recall: bool,
        #[arg(long, value_name = "count|duration")]
        step_recall_mode: Option<StepRecallMode>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
}

struct Plan {
    command: Command,
    config: RunConfig,
    threads: Option<usize>,
}

fn plan(cli: Cli) -> anyhow::Result<Plan> {
    let c = cli.common;
    let mut overrides = Overrides {
        seed: c.seed,
        t_percent: c.t_percent,
        merge_mode: c.merge_mode,
        window_s: c.window_s,
        layers: c.layers,
        heads: c.heads,
        d_model: c.d_model,
        max_segments: c.max_segments,
        dropout: c.dropout,
        lr: c.lr,
        weight_decay: c.weight_decay,
        epochs: c.epochs,
        batch_size: c.batch_size,
        ..Overrides::default()
    };
    let command = match cli.command {
        Cmd::Synth {
            out,
            tasks,
            videos_per_task,
            segments,
            dim,
            shared_steps,
            distractors,
            mention_prob,
            noise_sigma,
            holdout_per_task,
            frame_features,
        } => {
            overrides.synth = SynthOverrides {
                n_tasks: tasks,
                videos_per_task,
                segments_per_video: segments,
                dim,
                shared_steps_per_task: shared_steps,
                distractors_per_video: distractors,
                mention_prob,
                noise_sigma,
                holdout_per_task,
                frame_features,
            };
            Command::Synth { out }
        }
        Cmd::PseudoGen { manifest, out } => Command::PseudoGen { manifest, out },
        Cmd::Train { manifest, pseudo, out } => Command::Train { manifest, pseudo, out },
        Cmd::Infer { manifest, checkpoint, out } => Command::Infer { manifest, checkpoint, out },
        Cmd::Baseline { manifest, kind, out } => Command::Baseline { manifest, kind, out },
        Cmd::GtBuild { manifest, assets, out } => Command::GtBuild { manifest, assets, out },
        Cmd::Eval { pred, gt, intervals, no_step_recall, step_recall_mode, out } => {
            overrides.step_recall_mode = step_recall_mode;
            Command::Eval { pred, gt, intervals, step_recall: !no_step_recall, out }
        }
    };
    if c.threads == Some(0) {
        anyhow::bail!("--threads must be at least 1");
    }
    let config = RunConfig::load(c.config.as_deref(), &overrides)?;
    Ok(Plan { command, config, threads: c.threads })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IVSUM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let started = Instant::now();
    let prepared = plan(cli).and_then(|p| {
        let inputs = p.command.inputs()?;
        Ok((p, inputs))
    });
    let (plan, inputs) = match prepared {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = plan.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = plan.command.run(&plan.config).and_then(|()| {
        record::write_run_record(plan.command.out(), plan.command.name(), &plan.config, &inputs, started)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
