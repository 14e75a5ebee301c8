//! Resolved run configuration: defaults, then a JSON config file, then flags.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ivsum::eval::StepRecallMode;
use ivsum::grouping::MergeMode;
use ivsum::pseudo::{Objectives, PseudoConfig, SelectionConfig, DEFAULT_T_PERCENT};
use ivsum::scorer::{ScorerConfig, TextContextMode, TrainConfig};
use ivsum::synth::SynthConfig;

/// Every tunable of the pipeline. `seed`, `t_percent` and `window_s` are
/// the single sources for the matching fields of the nested sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub t_percent: f64,
    pub merge_mode: MergeMode,
    pub objectives: Objectives,
    pub window_s: f64,
    pub text_mode: TextContextMode,
    pub step_recall_mode: StepRecallMode,
    pub scorer: ScorerConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            t_percent: DEFAULT_T_PERCENT,
            merge_mode: MergeMode::default(),
            objectives: Objectives::default(),
            window_s: 5.0,
            text_mode: TextContextMode::default(),
            step_recall_mode: StepRecallMode::default(),
            scorer: ScorerConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Flag values that override the config file when present.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t_percent: Option<f64>,
    pub merge_mode: Option<MergeMode>,
    pub window_s: Option<f64>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub d_model: Option<usize>,
    pub max_segments: Option<usize>,
    pub dropout: Option<f64>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub step_recall_mode: Option<StepRecallMode>,
    pub synth: SynthOverrides,
}

#[derive(Debug, Default, Clone)]
pub struct SynthOverrides {
    pub n_tasks: Option<usize>,
    pub videos_per_task: Option<usize>,
    pub segments_per_video: Option<usize>,
    pub dim: Option<usize>,
    pub shared_steps_per_task: Option<usize>,
    pub distractors_per_video: Option<usize>,
    pub mention_prob: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub holdout_per_task: Option<usize>,
    pub frame_features: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config file {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.propagate();
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, o: &Overrides) {
        set(&mut self.seed, o.seed);
        set(&mut self.t_percent, o.t_percent);
        set(&mut self.merge_mode, o.merge_mode);
        set(&mut self.window_s, o.window_s);
        set(&mut self.step_recall_mode, o.step_recall_mode);
        set(&mut self.scorer.n_layers, o.layers);
        set(&mut self.scorer.n_heads, o.heads);
        set(&mut self.scorer.d_model, o.d_model);
        set(&mut self.scorer.max_segments, o.max_segments);
        set(&mut self.scorer.dropout, o.dropout);
        set(&mut self.train.lr, o.lr);
        set(&mut self.train.weight_decay, o.weight_decay);
        set(&mut self.train.epochs, o.epochs);
        set(&mut self.train.batch_size, o.batch_size);
        let s = &o.synth;
        set(&mut self.synth.n_tasks, s.n_tasks);
        set(&mut self.synth.videos_per_task, s.videos_per_task);
        set(&mut self.synth.segments_per_video, s.segments_per_video);
        set(&mut self.synth.dim, s.dim);
        set(&mut self.synth.shared_steps_per_task, s.shared_steps_per_task);
        set(&mut self.synth.distractors_per_video, s.distractors_per_video);
        set(&mut self.synth.mention_prob, s.mention_prob);
        set(&mut self.synth.noise_sigma, s.noise_sigma);
        set(&mut self.synth.holdout_per_task, s.holdout_per_task);
        self.synth.frame_features |= s.frame_features;
    }

    /// Copies the single-source values into the nested sections.
    fn propagate(&mut self) {
        self.synth.seed = self.seed;
        self.scorer.seed = self.seed;
        self.train.seed = self.seed;
        self.train.t_percent = self.t_percent;
        self.scorer.text_window_s = self.window_s;
        self.scorer.text_mode = self.text_mode;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        SelectionConfig { t_percent: self.t_percent }.validate()?;
        if !(self.window_s >= 0.0) {
            bail!("window_s must be non-negative, got {}", self.window_s);
        }
        self.scorer.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn pseudo(&self) -> PseudoConfig {
        PseudoConfig {
            selection: SelectionConfig { t_percent: self.t_percent },
            merge_mode: self.merge_mode,
            objectives: self.objectives,
        }
    }
}
