//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use ivsum::corpus::{EmbeddedVideo, TranscriptSentence};
use ivsum::eval::{kendall_tau, prf, spearman_rho};
use ivsum::grouping::{group_into_steps, MergeMode, Step};
use ivsum::gt::{build_ground_truth, localize_asset, verify_lengths, AssetKind, StepAsset};
use ivsum::pseudo::{cross_modal, task_relevance};
use ivsum::scorer::{loss, loss_and_grads, ScorerConfig, ScorerParams, Sequence};
use ivsum::synth::{generate, shared_step_assets, SynthConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ivsum")
}

/// Runs `ivsum` in `cwd` and returns its wall time.
fn ivsum(cwd: &Path, args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let out = Command::new(bin())
        .current_dir(cwd)
        .env("IVSUM_LOG", "error")
        .args(args)
        .output()
        .map_err(|e| format!("spawning ivsum: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "ivsum {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(start.elapsed())
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number {key:?}"))
}

// ---------------------------------------------------------------------------
// The CLI pipeline shared by criteria 1, 6 and 9.

const COMMON: [&str; 4] = ["--threads", "1", "--seed", "7"];

struct PipelineTimes {
    pseudo: Duration,
    training: Duration,
}

/// Synthesizes the reference corpus with held-out videos, builds pseudo
/// summaries, trains the small scorer and summarizes the held-out videos.
/// Paths are relative to `base`.
fn run_pipeline(base: &Path) -> Result<PipelineTimes, String> {
    let run = |args: &[&str]| {
        let mut all: Vec<&str> = args.to_vec();
        all.extend(COMMON);
        ivsum(base, &all)
    };
    let synth = run(&[
        "synth", "--out", "synth", "--tasks", "3", "--videos-per-task", "6", "--segments", "24",
        "--shared-steps", "5", "--distractors", "3", "--noise-sigma", "0.05", "--mention-prob", "1.0",
        "--holdout-per-task", "2",
    ])?;
    let pseudo = run(&["pseudo-gen", "--t", "55", "--manifest", "synth/manifest.json", "--out", "pseudo"])?;
    run(&["eval", "--pred", "pseudo", "--gt", "synth/gt", "--out", "eval_pseudo"])?;

    let scorer = ["--layers", "2", "--heads", "4", "--d-model", "64", "--epochs", "200"];
    let mut train = vec!["train", "--manifest", "synth/manifest.json", "--pseudo", "pseudo", "--out", "model"];
    train.extend(scorer);
    let fit = run(&train)?;
    let held_pseudo = run(&[
        "pseudo-gen", "--t", "55", "--manifest", "synth/holdout/manifest.json", "--out", "pseudo_held",
    ])?;
    let infer = run(&[
        "infer", "--t", "55", "--manifest", "synth/holdout/manifest.json", "--checkpoint", "model/scorer.ivsp",
        "--out", "pred",
    ])?;
    run(&["eval", "--pred", "pred", "--gt", "pseudo_held", "--no-step-recall", "--out", "eval_held"])?;
    Ok(PipelineTimes {
        pseudo: synth + pseudo,
        training: fit + held_pseudo + infer,
    })
}

struct Pipeline {
    dirs: [tempfile::TempDir; 2],
    times: Result<PipelineTimes, String>,
    second: Result<PipelineTimes, String>,
}

fn pipelines() -> Pipeline {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let times = run_pipeline(dirs[0].path());
    let second = run_pipeline(dirs[1].path());
    Pipeline { dirs, times, second }
}

// ---------------------------------------------------------------------------
// 1. Pseudo-summary recovery on the planted corpus.

fn criterion_1(p: &Pipeline) -> Outcome {
    let times = p.times.as_ref().map_err(Clone::clone)?;
    let base = p.dirs[0].path();
    let truth = read_json(&base.join("synth/truth.json"))?;
    let mut importance: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for task in 0..3 {
        let report = read_json(&base.join(format!("pseudo/report_task{task}.json")))?;
        for video in report["videos"].as_array().ok_or("report without videos")? {
            let mut per_segment = vec![f64::NAN; 24];
            for step in video["steps"].as_array().ok_or("video without steps")? {
                let imp = num(step, "importance")?;
                for i in step["segment_indices"].as_array().ok_or("step without segments")? {
                    per_segment[i.as_u64().ok_or("bad segment index")? as usize] = imp;
                }
            }
            importance.insert(video["video_id"].as_str().unwrap_or_default().to_owned(), per_segment);
        }
    }
    let videos = truth["videos"].as_array().ok_or("truth without videos")?;
    ensure!(videos.len() == 18, "expected 18 videos, found {}", videos.len());
    let mut ranked = 0;
    for v in videos {
        let id = v["video_id"].as_str().unwrap_or_default();
        let imp = importance.get(id).ok_or_else(|| format!("no report for {id}"))?;
        let (mut shared_min, mut distractor_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for step in v["steps"].as_array().ok_or("planted video without steps")? {
            let shared = step["shared_across_task"].as_bool().unwrap_or(false);
            for i in step["segment_indices"].as_array().ok_or("planted step without segments")? {
                let x = imp[i.as_u64().unwrap_or(0) as usize];
                if shared {
                    shared_min = shared_min.min(x);
                } else {
                    distractor_max = distractor_max.max(x);
                }
            }
        }
        if shared_min > distractor_max {
            ranked += 1;
        }
    }
    let fraction = ranked as f64 / videos.len() as f64;
    let recall = num(&read_json(&base.join("eval_pseudo/eval.json"))?["corpus"], "step_recall")?;
    let secs = times.pseudo.as_secs_f64();
    let detail = format!(
        "shared > distractor in {ranked}/{} videos ({:.1}%), step recall {recall:.3}, {secs:.2} s",
        videos.len(),
        100.0 * fraction
    );
    ensure!(fraction >= 0.95, "{detail}");
    ensure!(recall >= 0.90, "{detail}");
    ensure!(secs < 10.0, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 2. Task relevance and cross-modal scores against scalar loops.

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.random_range(2..10);
        let n_videos = rng.random_range(1..5);
        let steps: Vec<Vec<Step>> = (0..n_videos)
            .map(|v| {
                let n = rng.random_range(1..6);
                (0..n)
                    .map(|k| Step {
                        step_id: k,
                        video_id: format!("v{v}"),
                        segment_indices: vec![k],
                        vec: random_unit(&mut rng, dim),
                    })
                    .collect()
            })
            .collect();

        let trs = task_relevance(&steps).map_err(|e| e.to_string())?;
        let all: Vec<&Vec<f64>> = steps.iter().flatten().map(|s| &s.vec).collect();
        for (v, video) in steps.iter().enumerate() {
            for (k, step) in video.iter().enumerate() {
                let mut sum = 0.0;
                for other in &all {
                    for d in 0..dim {
                        sum += step.vec[d] * other[d];
                    }
                }
                worst = worst.max((trs[v][k] - sum / all.len() as f64).abs());
            }
        }

        let n_sentences = rng.random_range(1..5);
        let sentences: Vec<TranscriptSentence> = (0..n_sentences)
            .map(|i| TranscriptSentence {
                start_s: i as f64,
                end_s: i as f64 + 1.0,
                text: String::new(),
                vec: (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            })
            .collect();
        let (cms, _) = cross_modal(&steps[0], &sentences).map_err(|e| e.to_string())?;
        for (k, step) in steps[0].iter().enumerate() {
            let mut total = 0.0;
            for s in &sentences {
                let wide: Vec<f64> = s.vec.iter().map(|&x| f64::from(x)).collect();
                let n = wide.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut d = 0.0;
                for (a, b) in step.vec.iter().zip(&wide) {
                    d += a * b / n;
                }
                total += d;
            }
            worst = worst.max((cms[k] - total / sentences.len() as f64).abs());
        }
    }
    let detail = format!("100 instances, max deviation {worst:.2e}");
    ensure!(worst <= 1e-6, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 3. Step grouping recovers planted runs exactly without noise.

fn video_from_rows(rows: &[Vec<f64>]) -> EmbeddedVideo {
    let dim = rows[0].len();
    let flat: Vec<f32> = rows.iter().flatten().map(|&x| x as f32).collect();
    let m = Array2::from_shape_vec((rows.len(), dim), flat).unwrap();
    EmbeddedVideo::from_segment_matrix("v", "t", 8.0, rows.len() * 4, 4, &m).unwrap()
}

fn criterion_3() -> Outcome {
    let mut exact_seeds = 0;
    for seed in 0..100 {
        let config = SynthConfig { noise_sigma: 0.0, seed, ..SynthConfig::default() };
        let corpus = generate(&config).map_err(|e| e.to_string())?;
        let mut exact = true;
        for video in corpus.groups.iter().flat_map(|g| &g.videos) {
            let planted = corpus.truth.video(&video.video_id).ok_or("video missing from truth")?;
            let want: Vec<&Vec<usize>> = planted.steps.iter().map(|s| &s.segment_indices).collect();
            for mode in [MergeMode::RunningMean, MergeMode::PrevSegment] {
                let steps = group_into_steps(video, mode).map_err(|e| e.to_string())?;
                let got: Vec<&Vec<usize>> = steps.iter().map(|s| &s.segment_indices).collect();
                exact &= got == want;
            }
        }
        exact_seeds += usize::from(exact);
    }

    let n = 7;
    let orthogonal: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let identical = vec![vec![0.3, -0.2, 0.9, 0.1]; 6];
    let mut singleton_ok = true;
    let mut single_ok = true;
    for mode in [MergeMode::RunningMean, MergeMode::PrevSegment] {
        singleton_ok &= group_into_steps(&video_from_rows(&orthogonal), mode).map_err(|e| e.to_string())?.len() == n;
        single_ok &= group_into_steps(&video_from_rows(&identical), mode).map_err(|e| e.to_string())?.len() == 1;
    }
    let detail = format!(
        "exact in {exact_seeds}/100 seeds; orthogonal -> singletons: {singleton_ok}; identical -> one step: {single_ok}"
    );
    ensure!(exact_seeds == 100 && singleton_ok && single_ok, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 4. Rank correlations against brute force; prf hand cases.

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Tau-b by pair counting; `None` when undefined.
fn tau_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (sign(x[i] - x[j]), sign(y[i] - y[j]));
            if a == 0 {
                tx += 1;
            }
            if b == 0 {
                ty += 1;
            }
            match a * b {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let den = ((n0 - tx) * (n0 - ty)) as f64;
    (den > 0.0).then(|| (c - d) as f64 / den.sqrt())
}

/// Average rank by counting smaller and equal values.
fn ranks_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn rho_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (ranks_oracle(x), ranks_oracle(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn lists(len: usize) -> Vec<Vec<f64>> {
    const ALPHABET: [f64; 3] = [0.0, 0.5, 1.0];
    (0..3usize.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let v = ALPHABET[code % 3];
                    code /= 3;
                    v
                })
                .collect()
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut pairs = 0u64;
    let mut worst: f64 = 0.0;
    for len in 1..=6 {
        let all = lists(len);
        for x in &all {
            for y in &all {
                pairs += 1;
                let tau = kendall_tau(x, y).map_err(|e| e.to_string())?;
                let rho = spearman_rho(x, y).map_err(|e| e.to_string())?;
                for (got, want, what) in [(tau, tau_oracle(x, y), "tau"), (rho, rho_oracle(x, y), "rho")] {
                    match want {
                        Some(w) if len >= 2 => {
                            ensure!(!got.degenerate, "{what}{x:?},{y:?}: flagged degenerate");
                            worst = worst.max((got.value - w).abs());
                        }
                        _ => ensure!(
                            got.degenerate && got.value == 0.0,
                            "{what}{x:?},{y:?}: expected degenerate 0, got {got:?}"
                        ),
                    }
                }
            }
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e} over {pairs} pairs");

    let up = [0.1, 0.4, 0.2, 0.9, 0.7];
    let down: Vec<f64> = up.iter().map(|x| -x).collect();
    let t_id = kendall_tau(&up, &up).unwrap().value;
    let t_rev = kendall_tau(&up, &down).unwrap().value;
    let r_id = spearman_rho(&up, &up).unwrap().value;
    let r_rev = spearman_rho(&up, &down).unwrap().value;
    ensure!(
        t_id == 1.0 && t_rev == -1.0 && r_id == 1.0 && r_rev == -1.0,
        "identity/reversal: tau {t_id}/{t_rev}, rho {r_id}/{r_rev}"
    );

    let gt: Vec<u8> = [vec![1; 10], vec![0; 10]].concat();
    let half: Vec<u8> = [vec![1; 5], vec![0; 15]].concat();
    let same = prf(&gt, &gt).unwrap();
    let partial = prf(&half, &gt).unwrap();
    let empty = prf(&[0; 20], &gt).unwrap();
    ensure!(
        (same.precision, same.recall, same.f_score) == (1.0, 1.0, 1.0),
        "prf(gt, gt) = {same:?}"
    );
    ensure!(
        (partial.precision, partial.recall, partial.f_score) == (1.0, 0.5, 2.0 / 3.0),
        "prf(half, gt) = {partial:?}"
    );
    ensure!(
        (empty.precision, empty.recall, empty.f_score) == (0.0, 0.0, 0.0),
        "prf(zeros, gt) = {empty:?}"
    );
    Ok(format!("{pairs} list pairs, max deviation {worst:.1e}; hand cases exact"))
}

// ---------------------------------------------------------------------------
// 5. Analytic gradients against central differences.

fn criterion_5() -> Outcome {
    const EPS: f64 = 1e-4;
    const FLOOR: f64 = 1e-6;
    let start = Instant::now();
    let config = ScorerConfig {
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        dropout: 0.0,
        max_segments: 8,
        seed: 11,
        ..ScorerConfig::default()
    };
    let dim = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ScorerParams::init(&config, dim).map_err(|e| e.to_string())?;
    for layer in &mut params.layers {
        for t in [&mut layer.ln1_gain, &mut layer.ln1_bias, &mut layer.ln2_gain, &mut layer.ln2_bias] {
            t.mapv_inplace(|x| x + rng.random_range(-0.2..0.2));
        }
    }
    let batch: Vec<Sequence> = (0..2)
        .map(|_| Sequence {
            segments: Array2::from_shape_simple_fn((8, dim), || rng.random_range(-1.0..1.0)),
            contexts: Array2::from_shape_simple_fn((8, dim), || rng.random_range(-1.0..1.0)),
            n_real: 8,
            targets: (0..8).map(|_| rng.random::<f64>()).collect(),
        })
        .collect();

    let (_, grads) = loss_and_grads(&params, &config, &batch, None).map_err(|e| e.to_string())?;
    let analytic: Vec<(String, Vec<f64>)> =
        grads.named().into_iter().map(|(n, t)| (n, t.iter().copied().collect())).collect();
    let mut worst = (String::new(), 0.0f64);
    for (t, (name, a)) in analytic.iter().enumerate() {
        // Each worker perturbs its own copy of the parameters.
        let numeric: Vec<f64> = (0..a.len())
            .into_par_iter()
            .map_init(
                || params.clone(),
                |probe, i| {
                    let orig = params.named()[t].1.as_slice().unwrap()[i];
                    let mut at = |x: f64| {
                        probe.named_mut()[t].1.as_slice_mut().unwrap()[i] = x;
                        loss(probe, &config, &batch)
                    };
                    let up = at(orig + EPS)?;
                    let down = at(orig - EPS)?;
                    at(orig)?;
                    Ok((up - down) / (2.0 * EPS))
                },
            )
            .collect::<ivsum::Result<_>>()
            .map_err(|e| e.to_string())?;
        let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        let diff = l2(&mut a.iter().zip(&numeric).map(|(x, y)| x - y));
        let scale = l2(&mut a.iter().copied()).max(l2(&mut numeric.iter().copied())).max(FLOOR);
        let err = diff / scale;
        if err > worst.1 {
            worst = (name.clone(), err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} tensors, worst relative error {:.2e} ({}), {secs:.1} s",
        analytic.len(),
        worst.1,
        worst.0
    );
    ensure!(worst.1 < 1e-4 && secs < 60.0, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 6. Training convergence and held-out quality.

/// 20-epoch trailing mean; after the first window, it may never rebound
/// above its running minimum by more than 5% of the total drop.
fn monotone_smoothed(losses: &[f64]) -> Result<(), String> {
    const WINDOW: usize = 20;
    ensure!(losses.len() > WINDOW, "only {} epochs", losses.len());
    let smooth: Vec<f64> = losses.windows(WINDOW).map(|w| w.iter().sum::<f64>() / WINDOW as f64).collect();
    let drop = smooth[0] - smooth[smooth.len() - 1];
    ensure!(drop > 0.0, "smoothed loss did not decrease ({:.4} -> {:.4})", smooth[0], smooth[smooth.len() - 1]);
    let mut low = smooth[0];
    for (i, &s) in smooth.iter().enumerate() {
        ensure!(
            s <= low + 0.05 * drop,
            "smoothed loss rebounds at epoch {}: {s:.5} vs minimum {low:.5}",
            i + WINDOW
        );
        low = low.min(s);
    }
    Ok(())
}

fn criterion_6(p: &Pipeline) -> Outcome {
    let times = p.times.as_ref().map_err(Clone::clone)?;
    let base = p.dirs[0].path();
    let report = read_json(&base.join("model/loss.json"))?;
    let losses: Vec<f64> = report["epoch_losses"]
        .as_array()
        .ok_or("no epoch losses")?
        .iter()
        .filter_map(Value::as_f64)
        .collect();
    ensure!(losses.len() == 200, "{} epochs recorded", losses.len());
    let mse = num(&report, "final_mse")?;
    monotone_smoothed(&losses)?;
    let eval = read_json(&base.join("eval_held/eval.json"))?;
    let n_held = num(&eval["corpus"], "n_videos")?;
    let f = num(&eval["corpus"], "f_score")?;
    let secs = times.training.as_secs_f64();
    let detail = format!(
        "training MSE {mse:.4} (first epoch {:.4}), held-out F {f:.3} on {n_held} videos, {secs:.1} s",
        losses[0]
    );
    ensure!(mse < 0.02 && f >= 0.75 && n_held == 6.0 && secs < 300.0, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 7. Baseline ordering.

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = dir.path();
    ivsum(base, &["synth", "--out", "corpus", "--frame-features", "--seed", "7", "--threads", "1"])?;
    let mut scores = Vec::new();
    for kind in ["step", "segment", "frame"] {
        let out = format!("b_{kind}");
        ivsum(base, &["baseline", "--manifest", "corpus/manifest.json", "--kind", kind, "--out", &out])?;
        let eval_out = format!("e_{kind}");
        ivsum(base, &["eval", "--pred", &out, "--gt", "corpus/gt", "--out", &eval_out])?;
        scores.push(num(&read_json(&base.join(&eval_out).join("eval.json"))?["corpus"], "f_score")?);
    }
    let detail = format!("F step {:.4} >= segment {:.4} >= frame {:.4}", scores[0], scores[1], scores[2]);
    ensure!(scores[0] >= scores[1] && scores[1] >= scores[2], "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 8. Reference summaries from localized assets.

fn image(feature: Vec<f32>) -> StepAsset {
    StepAsset { step_id: 0, kind: AssetKind::Image, feature, clip_len_s: None, description: None }
}

fn criterion_8() -> Outcome {
    // Planted assets localize to their middle frames.
    let corpus = generate(&SynthConfig { frame_features: true, ..SynthConfig::default() }).map_err(|e| e.to_string())?;
    let mut localized = 0;
    for video in corpus.groups.iter().flat_map(|g| &g.videos) {
        let planted = corpus.truth.video(&video.video_id).ok_or("video missing from truth")?;
        let ff = video.frame_features.as_ref().ok_or("no frame features")?;
        let assets = shared_step_assets(video, planted).map_err(|e| e.to_string())?;
        for (asset, (a, b)) in assets.iter().zip(planted.shared_intervals(video.segment_len)) {
            let loc = localize_asset(asset, ff, video.fps).map_err(|e| e.to_string())?;
            let center = (a + b) / 2;
            let half = (2.5 * video.fps).round() as usize;
            ensure!(loc.matched_frame == center, "{}: matched {} not {center}", video.video_id, loc.matched_frame);
            ensure!(
                (loc.start, loc.end) == (center.saturating_sub(half), (center + half).min(video.n_frames)),
                "{}: window {:?}",
                video.video_id,
                (loc.start, loc.end)
            );
            localized += 1;
        }

        // Segment importance is exactly the mean of its frame labels.
        let gt = build_ground_truth(video, &assets).map_err(|e| e.to_string())?;
        let track = gt.track(video.segment_len);
        for (i, chunk) in gt.frame_labels.chunks_exact(video.segment_len).enumerate() {
            let ones = chunk.iter().filter(|&&l| l == 1).count();
            let want = ones as f64 / video.segment_len as f64;
            ensure!(gt.segment_scores[i].to_bits() == want.to_bits(), "segment {i}: {}", gt.segment_scores[i]);
            ensure!(track.segment_scores[i].to_bits() == (want as f32).to_bits(), "track segment {i}");
        }
    }

    // Window bounds at 10 fps: interior, clamped start, clamped end, clip.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, dim, fps) = (200usize, 16usize, 10.0);
    let ff = Array2::from_shape_simple_fn((n, dim), || rng.random_range(-1.0f32..1.0));
    let at = |frame: usize| ff.row(frame).to_vec();
    let window = |asset: &StepAsset| localize_asset(asset, &ff, fps).map(|l| (l.matched_frame, l.start, l.end));
    let cases = [
        (window(&image(at(100))), (100, 75, 125)),
        (window(&image(at(3))), (3, 0, 28)),
        (window(&image(at(190))), (190, 165, 200)),
        (
            window(&StepAsset { kind: AssetKind::Clip, clip_len_s: Some(4.0), ..image(at(50)) }),
            (50, 50, 90),
        ),
    ];
    for (got, want) in cases {
        ensure!(got.as_ref().ok() == Some(&want), "window {got:?}, expected {want:?}");
    }

    // A summary covering 15% of the video is flagged as too short.
    let m = Array2::from_shape_simple_fn((n / 10, dim), || rng.random_range(-1.0f32..1.0));
    let mut video = EmbeddedVideo::from_segment_matrix("short", "t", fps, n, 10, &m).map_err(|e| e.to_string())?;
    video.frame_features = Some(ff.clone());
    let clip = StepAsset { kind: AssetKind::Clip, clip_len_s: Some(3.0), ..image(at(20)) };
    let report = verify_lengths(&build_ground_truth(&video, &[clip]).map_err(|e| e.to_string())?);
    ensure!(
        report.coverage == 0.15 && report.too_short && !report.too_long,
        "15% coverage report: {report:?}"
    );
    Ok(format!("{localized} planted assets localized exactly; windows and means exact; 15% flagged too_short"))
}

// ---------------------------------------------------------------------------
// 9. Two pipeline runs in different directories give identical outputs.

fn files(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

/// A run record without its timing fields.
fn strip_timing(bytes: &[u8]) -> Result<Value, String> {
    let mut v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let obj = v.as_object_mut().ok_or("run record is not an object")?;
    obj.remove("finished_at");
    obj.remove("wall_time_s");
    Ok(v)
}

fn criterion_9(p: &Pipeline) -> Outcome {
    p.times.as_ref().map_err(Clone::clone)?;
    p.second.as_ref().map_err(Clone::clone)?;
    let a = files(p.dirs[0].path())?;
    let b = files(p.dirs[1].path())?;
    let names_a: Vec<_> = a.keys().collect();
    let names_b: Vec<_> = b.keys().collect();
    ensure!(names_a == names_b, "file sets differ");
    let mut records = 0;
    for (path, bytes) in &a {
        let other = &b[path];
        if path.file_name().is_some_and(|n| n == "run.json") {
            ensure!(strip_timing(bytes)? == strip_timing(other)?, "{} differs", path.display());
            records += 1;
        } else {
            ensure!(bytes == other, "{} differs", path.display());
        }
    }
    Ok(format!("{} files identical ({records} run records compared without timing)", a.len()))
}

// ---------------------------------------------------------------------------

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS [{id}] {name}: {detail} [{secs:.1}s]"),
        Err(detail) => println!("FAIL [{id}] {name}: {detail} [{secs:.1}s]"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    // The libtest harness would pass its own flags; listing must not run anything.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let pipeline = pipelines();
    let results = [
        report(1, "synthetic pseudo-summary recovery", || criterion_1(&pipeline)),
        report(2, "oracle equivalence of task relevance and cross-modal scores", criterion_2),
        report(3, "step grouping exactness", criterion_3),
        report(4, "metric oracles", criterion_4),
        report(5, "gradient check", criterion_5),
        report(6, "training convergence", || criterion_6(&pipeline)),
        report(7, "baseline ordering", criterion_7),
        report(8, "ground-truth builder exactness", criterion_8),
        report(9, "determinism", || criterion_9(&pipeline)),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
