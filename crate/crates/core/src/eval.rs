//! Summary metrics: frame-level precision/recall/F-score, Kendall's tau-b and
//! Spearman's rho over segment scores, and step recall.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::ScoreTrack;
use crate::gt::StepInterval;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Overlap-based precision, recall and F-score of binary frame labels.
/// Empty denominators give 0.
pub fn prf(pred: &[u8], gt: &[u8]) -> Result<Prf> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let overlap = pred.iter().zip(gt).filter(|&(&p, &g)| p == 1 && g == 1).count();
    let precision = ratio(overlap, pred.iter().filter(|&&p| p == 1).count());
    let recall = ratio(overlap, gt.iter().filter(|&&g| g == 1).count());
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Prf {
        precision,
        recall,
        f_score,
    })
}

/// A rank correlation; `degenerate` marks an undefined value reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub value: f64,
    pub degenerate: bool,
}

impl RankCorrelation {
    const DEGENERATE: Self = RankCorrelation {
        value: 0.0,
        degenerate: true,
    };
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Sum of `t(t-1)/2` over runs of equal adjacent elements.
fn tie_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts strict inversions while merge-sorting `v` in place.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b with tie correction, via Knight's `O(n log n)` algorithm.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len() as u64;
    if n < 2 {
        return Ok(RankCorrelation::DEGENERATE);
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp_f64(&a.0, &b.0).then(cmp_f64(&a.1, &b.1)));
    let n0 = n * (n - 1) / 2;
    let ties_x = tie_pairs(&pairs, |a, b| a.0 == b.0);
    let ties_xy = tie_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(ys.len());
    let discordant = count_inversions(&mut ys, &mut scratch);
    let ties_y = tie_pairs(&ys, |a, b| a == b);
    if ties_x == n0 || ties_y == n0 {
        return Ok(RankCorrelation::DEGENERATE);
    }
    let concordant = n0 + ties_xy - ties_x - ties_y - discordant;
    let num = concordant as f64 - discordant as f64;
    let den = ((n0 - ties_x) as f64 * (n0 - ties_y) as f64).sqrt();
    Ok(RankCorrelation {
        value: num / den,
        degenerate: false,
    })
}

/// 1-based fractional ranks; tied values share their average rank.
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| cmp_f64(&v[a], &v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Spearman's rho: Pearson correlation of fractional ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Ok(RankCorrelation::DEGENERATE);
    }
    Ok(match pearson(&fractional_ranks(x), &fractional_ranks(y)) {
        Some(value) => RankCorrelation {
            value: value.clamp(-1.0, 1.0),
            degenerate: false,
        },
        None => RankCorrelation::DEGENERATE,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRecallMode {
    /// Fraction of reference steps with at least one selected frame.
    #[default]
    Count,
    /// Duration of covered reference steps over their total duration.
    Duration,
}

impl std::str::FromStr for StepRecallMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "count" => Ok(StepRecallMode::Count),
            "duration" => Ok(StepRecallMode::Duration),
            other => Err(format!("unknown step-recall mode {other:?} (count | duration)")),
        }
    }
}

pub fn step_recall(pred: &[u8], steps: &[StepInterval], mode: StepRecallMode) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::Invalid("step recall needs at least one reference step".into()));
    }
    let covered = |s: &StepInterval| {
        let end = s.end.min(pred.len());
        s.start < end && pred[s.start..end].contains(&1)
    };
    Ok(match mode {
        StepRecallMode::Count => {
            steps.iter().filter(|s| covered(s)).count() as f64 / steps.len() as f64
        }
        StepRecallMode::Duration => {
            let total: usize = steps.iter().map(|s| s.end - s.start).sum();
            let hit: usize = steps.iter().filter(|s| covered(s)).map(|s| s.end - s.start).sum();
            ratio(hit, total)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tau: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_recall: Option<f64>,
    pub degenerate_rank: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub n_videos: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tau: f64,
    pub rho: f64,
    /// Mean over the videos that have reference step intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_recall: Option<f64>,
    /// Videos whose tau or rho was undefined and counted as 0.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub videos: Vec<VideoMetrics>,
    pub corpus: CorpusMetrics,
}

pub fn evaluate_video(
    pred: &ScoreTrack,
    gt: &ScoreTrack,
    intervals: Option<&[StepInterval]>,
    mode: StepRecallMode,
) -> Result<VideoMetrics> {
    let p = prf(&pred.frame_labels, &gt.frame_labels)?;
    let ps: Vec<f64> = pred.segment_scores.iter().map(|&s| f64::from(s)).collect();
    let gs: Vec<f64> = gt.segment_scores.iter().map(|&s| f64::from(s)).collect();
    let tau = kendall_tau(&ps, &gs)?;
    let rho = spearman_rho(&ps, &gs)?;
    let step_recall = match intervals {
        Some(iv) if !iv.is_empty() => Some(step_recall(&pred.frame_labels, iv, mode)?),
        _ => None,
    };
    Ok(VideoMetrics {
        video_id: pred.video_id.clone(),
        precision: p.precision,
        recall: p.recall,
        f_score: p.f_score,
        tau: tau.value,
        rho: rho.value,
        step_recall,
        degenerate_rank: tau.degenerate || rho.degenerate,
    })
}

/// Per-video metrics and their unweighted corpus means.
pub fn evaluate_corpus(
    pred: &BTreeMap<String, ScoreTrack>,
    gt: &BTreeMap<String, ScoreTrack>,
    intervals: Option<&BTreeMap<String, Vec<StepInterval>>>,
    mode: StepRecallMode,
) -> Result<EvalReport> {
    let only_pred: Vec<String> = pred.keys().filter(|k| !gt.contains_key(*k)).cloned().collect();
    let only_gt: Vec<String> = gt.keys().filter(|k| !pred.contains_key(*k)).cloned().collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(Error::IdMismatch { only_pred, only_gt });
    }
    if pred.is_empty() {
        return Err(Error::Invalid("no videos to evaluate".into()));
    }
    let videos: Vec<VideoMetrics> = pred
        .iter()
        .map(|(id, p)| {
            let iv = intervals.and_then(|m| m.get(id)).map(Vec::as_slice);
            evaluate_video(p, &gt[id], iv, mode)
        })
        .collect::<Result<_>>()?;
    let n = videos.len() as f64;
    let mean = |f: fn(&VideoMetrics) -> f64| videos.iter().map(f).sum::<f64>() / n;
    let recalls: Vec<f64> = videos.iter().filter_map(|v| v.step_recall).collect();
    let corpus = CorpusMetrics {
        n_videos: videos.len(),
        precision: mean(|v| v.precision),
        recall: mean(|v| v.recall),
        f_score: mean(|v| v.f_score),
        tau: mean(|v| v.tau),
        rho: mean(|v| v.rho),
        step_recall: (!recalls.is_empty())
            .then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
        degenerate: videos.iter().filter(|v| v.degenerate_rank).count(),
    };
    Ok(EvalReport { videos, corpus })
}

impl EvalReport {
    /// Aligned plain-text table, one row per video plus the corpus mean.
    pub fn table(&self) -> String {
        let width = self
            .videos
            .iter()
            .map(|v| v.video_id.len())
            .chain(["video".len(), "MEAN".len()])
            .max()
            .unwrap_or(5);
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>11}",
            "video", "precision", "recall", "f_score", "tau", "rho", "step_recall"
        );
        let mut row = |id: &str, p: f64, r: f64, f: f64, t: f64, rho: f64, sr: Option<f64>, flag: &str| {
            let _ = writeln!(
                out,
                "{id:<width$}  {p:>9.4}  {r:>9.4}  {f:>9.4}  {t:>9.4}  {rho:>9.4}  {:>11}{flag}",
                fmt_opt(sr)
            );
        };
        for v in &self.videos {
            let flag = if v.degenerate_rank { "  (degenerate rank)" } else { "" };
            row(&v.video_id, v.precision, v.recall, v.f_score, v.tau, v.rho, v.step_recall, flag);
        }
        let c = &self.corpus;
        row("MEAN", c.precision, c.recall, c.f_score, c.tau, c.rho, c.step_recall, "");
        let _ = writeln!(out, "videos: {}  degenerate: {}", c.n_videos, c.degenerate);
        out
    }
}
