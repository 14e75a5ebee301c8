//! Small dense-vector helpers shared by the similarity-based stages.

use crate::{Error, Result};

/// Norms below this are treated as zero vectors.
pub const MIN_NORM: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L2-normalizes `v` after widening to f64. `what` names the vector in the error.
pub fn normalized(v: &[f32], what: impl FnOnce() -> String) -> Result<Vec<f64>> {
    let wide: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    normalized_f64(wide, what)
}

pub fn normalized_f64(mut v: Vec<f64>, what: impl FnOnce() -> String) -> Result<Vec<f64>> {
    let n = norm(&v);
    if !(n >= MIN_NORM) {
        return Err(Error::ZeroVector(what()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Mean of a set of equal-length vectors.
pub fn mean<'a>(vs: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for v in vs {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        count += 1;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    acc
}

/// Min-max rescales to `[0, 1]`; a constant input maps to 0.5 everywhere.
pub fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Mean similarity of `query` (unit) to each of `targets` (unit); 0 when there are none.
pub fn mean_similarity(query: &[f64], targets: &[Vec<f64>]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    targets.iter().map(|t| dot(query, t)).sum::<f64>() / targets.len() as f64
}
