use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{LayerParams, ScorerConfig, ScorerParams};
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// One padded token sequence: the first `n_real` rows are real segments,
/// the rest are zero padding excluded from attention and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `L x D` segment embeddings.
    pub segments: Array2<f64>,
    /// `L x D` transcript contexts.
    pub contexts: Array2<f64>,
    pub n_real: usize,
    /// Targets for the real rows; empty for inference.
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.segments.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, params: &ScorerParams) -> Result<()> {
        let d = params.input_dim();
        if self.segments.ncols() != d || self.contexts.ncols() != d {
            return Err(Error::DimMismatch {
                video_id: "<sequence>".into(),
                expected: d,
                found: self.segments.ncols().max(self.contexts.ncols()),
            });
        }
        if self.contexts.nrows() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: self.contexts.nrows(),
            });
        }
        if self.len() > params.max_segments() {
            return Err(Error::Invalid(format!(
                "sequence of {} tokens exceeds the positional table ({})",
                self.len(),
                params.max_segments()
            )));
        }
        if self.n_real == 0 || self.n_real > self.len() {
            return Err(Error::Invalid(format!(
                "sequence has {} real tokens out of {}",
                self.n_real,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Seeds dropout for one sequence; `None` everywhere means evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutSeed(pub u64);

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

fn col_sum(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

struct LayerNormCache {
    normed: Array2<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Array2<f64>, gain: &Array2<f64>, bias: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
    let n = x.ncols() as f64;
    let mut normed = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in normed.rows_mut() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * inv);
        inv_std.push(inv);
    }
    let out = &normed * gain + bias;
    (out, LayerNormCache { normed, inv_std })
}

/// Returns `d_input` and accumulates gain/bias gradients.
fn layer_norm_backward(
    d_out: &Array2<f64>,
    cache: &LayerNormCache,
    gain: &Array2<f64>,
    d_gain: &mut Array2<f64>,
    d_bias: &mut Array2<f64>,
) -> Array2<f64> {
    *d_gain += &col_sum(&(d_out * &cache.normed));
    *d_bias += &col_sum(d_out);
    let d_normed = d_out * gain;
    let n = d_out.ncols() as f64;
    let mut d_in = Array2::zeros(d_out.raw_dim());
    for (i, mut row) in d_in.rows_mut().into_iter().enumerate() {
        let dn = d_normed.row(i);
        let xh = cache.normed.row(i);
        let mean_dn = dn.sum() / n;
        let mean_dn_xh = dn.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
        for ((o, &a), &b) in row.iter_mut().zip(dn).zip(xh) {
            *o = cache.inv_std[i] * (a - mean_dn - b * mean_dn_xh);
        }
    }
    d_in
}

/// Inverted-dropout mask (entries `0` or `1 / (1 - p)`), or `None` when off.
fn dropout_mask(rng: Option<&mut ChaCha8Rng>, shape: (usize, usize), p: f64) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    }))
}

fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

struct LayerCache {
    ln1: LayerNormCache,
    normed1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights per head, `L x L`.
    probs: Vec<Array2<f64>>,
    attended: Array2<f64>,
    drop_attn: Option<Array2<f64>>,
    ln2: LayerNormCache,
    normed2: Array2<f64>,
    hidden_pre: Array2<f64>,
    hidden: Array2<f64>,
    drop_ff: Option<Array2<f64>>,
}

struct Cache {
    fuse_pre: Array2<f64>,
    fuse_hidden: Array2<f64>,
    token_input: Array2<f64>,
    layers: Vec<LayerCache>,
    last: Array2<f64>,
    scores: Vec<f64>,
}

fn layer_forward(
    x: &Array2<f64>,
    lp: &LayerParams,
    config: &ScorerConfig,
    n_real: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> (Array2<f64>, LayerCache) {
    let (len, dm) = x.dim();
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let (normed1, ln1) = layer_norm(x, &lp.ln1_gain, &lp.ln1_bias);
    let q = affine(&normed1, &lp.wq, &lp.bq);
    let k = affine(&normed1, &lp.wk, &lp.bk);
    let v = affine(&normed1, &lp.wv, &lp.bv);
    let mut attended = Array2::zeros((len, dm));
    let mut probs = Vec::with_capacity(config.n_heads);
    for h in 0..config.n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        for mut row in p.rows_mut() {
            // Padding keys get zero weight.
            row.slice_mut(s![n_real..]).fill(f64::NEG_INFINITY);
            let max = row.slice(s![..n_real]).fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        attended.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    let attn_out = affine(&attended, &lp.wo, &lp.bo);
    let drop_attn = dropout_mask(rng.as_deref_mut(), (len, dm), config.dropout);
    let x_mid = x + &apply_mask(attn_out, &drop_attn);

    let (normed2, ln2) = layer_norm(&x_mid, &lp.ln2_gain, &lp.ln2_bias);
    let hidden_pre = affine(&normed2, &lp.ff_w1, &lp.ff_b1);
    let hidden = hidden_pre.mapv(gelu);
    let ff_out = affine(&hidden, &lp.ff_w2, &lp.ff_b2);
    let drop_ff = dropout_mask(rng, (len, dm), config.dropout);
    let out = &x_mid + &apply_mask(ff_out, &drop_ff);

    let cache = LayerCache {
        ln1,
        normed1,
        q,
        k,
        v,
        probs,
        attended,
        drop_attn,
        ln2,
        normed2,
        hidden_pre,
        hidden,
        drop_ff,
    };
    (out, cache)
}

fn layer_backward(
    d_out: &Array2<f64>,
    lp: &LayerParams,
    cache: &LayerCache,
    grads: &mut LayerParams,
    config: &ScorerConfig,
) -> Array2<f64> {
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // Feed-forward branch.
    let d_ff = apply_mask(d_out.clone(), &cache.drop_ff);
    grads.ff_w2 += &cache.hidden.t().dot(&d_ff);
    grads.ff_b2 += &col_sum(&d_ff);
    let d_hidden = d_ff.dot(&lp.ff_w2.t());
    let d_pre = d_hidden * &cache.hidden_pre.mapv(gelu_grad);
    grads.ff_w1 += &cache.normed2.t().dot(&d_pre);
    grads.ff_b1 += &col_sum(&d_pre);
    let d_normed2 = d_pre.dot(&lp.ff_w1.t());
    let d_mid = d_out
        + &layer_norm_backward(
            &d_normed2,
            &cache.ln2,
            &lp.ln2_gain,
            &mut grads.ln2_gain,
            &mut grads.ln2_bias,
        );

    // Attention branch.
    let d_attn = apply_mask(d_mid.clone(), &cache.drop_attn);
    grads.wo += &cache.attended.t().dot(&d_attn);
    grads.bo += &col_sum(&d_attn);
    let d_attended = d_attn.dot(&lp.wo.t());
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, p) in cache.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let d_head = d_attended.slice(cols);
        let d_p = d_head.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&d_head));
        let mut d_scores = p * &d_p;
        for (mut ds_row, p_row) in d_scores.rows_mut().into_iter().zip(p.rows()) {
            let dot = ds_row.sum();
            ds_row.zip_mut_with(&p_row, |ds, &pv| *ds -= pv * dot);
        }
        d_scores *= scale;
        dq.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
    }
    let n1t = cache.normed1.t();
    grads.wq += &n1t.dot(&dq);
    grads.bq += &col_sum(&dq);
    grads.wk += &n1t.dot(&dk);
    grads.bk += &col_sum(&dk);
    grads.wv += &n1t.dot(&dv);
    grads.bv += &col_sum(&dv);
    let d_normed1 = dq.dot(&lp.wq.t()) + dk.dot(&lp.wk.t()) + dv.dot(&lp.wv.t());
    d_mid
        + layer_norm_backward(
            &d_normed1,
            &cache.ln1,
            &lp.ln1_gain,
            &mut grads.ln1_gain,
            &mut grads.ln1_bias,
        )
}

fn forward_cached(
    params: &ScorerParams,
    config: &ScorerConfig,
    seq: &Sequence,
    dropout: Option<DropoutSeed>,
) -> Result<Cache> {
    seq.check(params)?;
    let len = seq.len();
    let mut rng = dropout.map(|DropoutSeed(s)| ChaCha8Rng::seed_from_u64(s));

    let fuse_pre = affine(&seq.contexts, &params.fuse_w1, &params.fuse_b1);
    let fuse_hidden = fuse_pre.mapv(gelu);
    let fused = affine(&fuse_hidden, &params.fuse_w2, &params.fuse_b2);
    let token_input = concatenate(Axis(1), &[seq.segments.view(), fused.view()])
        .expect("row counts match");
    let mut x = affine(&token_input, &params.input_w, &params.input_b)
        + params.positional.slice(s![..len, ..]);

    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (next, cache) = layer_forward(&x, lp, config, seq.n_real, rng.as_mut());
        layers.push(cache);
        x = next;
    }
    let logits = affine(&x, &params.head_w, &params.head_b);
    let scores = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok(Cache {
        fuse_pre,
        fuse_hidden,
        token_input,
        layers,
        last: x,
        scores,
    })
}

/// Scores for every token of the sequence (padding rows included; callers
/// read the first `n_real`). Evaluation mode: no dropout.
pub fn forward(params: &ScorerParams, config: &ScorerConfig, seq: &Sequence) -> Result<Vec<f64>> {
    Ok(forward_cached(params, config, seq, None)?.scores)
}

/// Mean squared error over paired values.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Invalid("loss over zero segments".into()));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Batch loss: per-sequence MSE over real tokens, averaged over sequences.
pub fn loss(params: &ScorerParams, config: &ScorerConfig, batch: &[Sequence]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let mut total = 0.0;
    for seq in batch {
        let scores = forward(params, config, seq)?;
        total += mse(&scores[..seq.n_real], &seq.targets)?;
    }
    Ok(total / batch.len() as f64)
}

fn sequence_grads(
    params: &ScorerParams,
    config: &ScorerConfig,
    seq: &Sequence,
    dropout: Option<DropoutSeed>,
    weight: f64,
) -> Result<(f64, ScorerParams)> {
    if seq.targets.len() != seq.n_real {
        return Err(Error::LengthMismatch {
            expected: seq.n_real,
            found: seq.targets.len(),
        });
    }
    let cache = forward_cached(params, config, seq, dropout)?;
    let n = seq.n_real as f64;
    let loss = mse(&cache.scores[..seq.n_real], &seq.targets)?;

    let mut g = params.zeros_like();
    // d loss / d logit, zero on padding.
    let mut d_logits = Array2::zeros((seq.len(), 1));
    for i in 0..seq.n_real {
        let y = cache.scores[i];
        d_logits[[i, 0]] = weight * 2.0 * (y - seq.targets[i]) / n * y * (1.0 - y);
    }
    g.head_w += &cache.last.t().dot(&d_logits);
    g.head_b += &col_sum(&d_logits);
    let mut dx = d_logits.dot(&params.head_w.t());

    for ((lp, lc), lg) in params
        .layers
        .iter()
        .zip(&cache.layers)
        .zip(g.layers.iter_mut())
        .rev()
    {
        dx = layer_backward(&dx, lp, lc, lg, config);
    }

    let len = seq.len();
    g.positional.slice_mut(s![..len, ..]).assign(&dx);
    g.input_w += &cache.token_input.t().dot(&dx);
    g.input_b += &col_sum(&dx);
    let d_tokens = dx.dot(&params.input_w.t());
    let d = params.input_dim();
    let d_fused: ArrayView2<f64> = d_tokens.slice(s![.., d..]);
    g.fuse_w2 += &cache.fuse_hidden.t().dot(&d_fused);
    g.fuse_b2 += &d_fused.sum_axis(Axis(0)).insert_axis(Axis(0));
    let d_fuse_pre = d_fused.dot(&params.fuse_w2.t()) * &cache.fuse_pre.mapv(gelu_grad);
    g.fuse_w1 += &seq.contexts.t().dot(&d_fuse_pre);
    g.fuse_b1 += &col_sum(&d_fuse_pre);
    Ok((loss, g))
}

/// Batch loss and its gradient with respect to every parameter tensor.
///
/// Sequences are processed in parallel; their gradients are summed in
/// batch order so the result does not depend on the thread count.
/// `dropout` seeds one dropout stream per sequence (`seed + index`).
pub fn loss_and_grads(
    params: &ScorerParams,
    config: &ScorerConfig,
    batch: &[Sequence],
    dropout: Option<DropoutSeed>,
) -> Result<(f64, ScorerParams)> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, ScorerParams)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let seed = dropout.map(|DropoutSeed(s)| DropoutSeed(s.wrapping_add(i as u64)));
            sequence_grads(params, config, seq, seed, weight)
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut grads = params.zeros_like();
    for (l, g) in &parts {
        total += l;
        grads.add_assign(g);
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    Ok((total * weight, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn config() -> ScorerConfig {
        ScorerConfig {
            d_model: 8,
            n_layers: 2,
            n_heads: 2,
            dropout: 0.0,
            max_segments: 6,
            seed: 11,
            ..ScorerConfig::default()
        }
    }

    fn random_sequence(rng: &mut ChaCha8Rng, len: usize, n_real: usize, dim: usize) -> Sequence {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut segments = Array2::from_shape_simple_fn((len, dim), || normal.sample(rng));
        let mut contexts = Array2::from_shape_simple_fn((len, dim), || normal.sample(rng));
        segments.slice_mut(s![n_real.., ..]).fill(0.0);
        contexts.slice_mut(s![n_real.., ..]).fill(0.0);
        let targets = (0..n_real).map(|_| rng.random::<f64>()).collect();
        Sequence { segments, contexts, n_real, targets }
    }

    #[test]
    fn zero_head_gives_half() {
        let mut p = ScorerParams::init(&config(), 4).unwrap();
        p.head_w.fill(0.0);
        p.head_b.fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = random_sequence(&mut rng, 5, 5, 4);
        assert!(forward(&p, &config(), &seq).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(mse(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(mse(&[0.5], &[1.0]).unwrap(), 0.25);
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(mse(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn padding_is_neutral() {
        let cfg = config();
        let p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let short = random_sequence(&mut rng, 3, 3, 4);
        let mut padded = short.clone();
        padded.segments = concatenate(Axis(0), &[short.segments.view(), Array2::zeros((3, 4)).view()]).unwrap();
        padded.contexts = concatenate(Axis(0), &[short.contexts.view(), Array2::zeros((3, 4)).view()]).unwrap();
        let a = forward(&p, &cfg, &short).unwrap();
        let b = forward(&p, &cfg, &padded).unwrap();
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
        let (la, ga) = loss_and_grads(&p, &cfg, &[short], None).unwrap();
        let (lb, gb) = loss_and_grads(&p, &cfg, &[padded], None).unwrap();
        assert!((la - lb).abs() < 1e-12);
        for ((name, x), (_, y)) in ga.named().into_iter().zip(gb.named()) {
            let diff = (x - y).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
            assert!(diff < 1e-10, "{name}: {diff}");
        }
    }

    #[test]
    fn swapping_inputs_and_positions_permutes_outputs() {
        let cfg = config();
        let mut p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = random_sequence(&mut rng, 5, 5, 4);
        let base = forward(&p, &cfg, &seq).unwrap();
        let mut swapped = seq.clone();
        for m in [&mut swapped.segments, &mut swapped.contexts, &mut p.positional] {
            let r1 = m.row(1).to_owned();
            let r3 = m.row(3).to_owned();
            m.row_mut(1).assign(&r3);
            m.row_mut(3).assign(&r1);
        }
        let out = forward(&p, &cfg, &swapped).unwrap();
        for (i, j) in [(0, 0), (1, 3), (2, 2), (3, 1), (4, 4)] {
            assert!((out[i] - base[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let cfg = config();
        let p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut seq = random_sequence(&mut rng, 5, 4, 4);
        seq.targets = forward(&p, &cfg, &seq).unwrap()[..4].to_vec();
        let (l, g) = loss_and_grads(&p, &cfg, &[seq], None).unwrap();
        assert_eq!(l, 0.0);
        for (name, t) in g.named() {
            assert!(t.iter().all(|&x| x == 0.0), "{name}");
        }
    }

    #[test]
    fn head_gradient_linear_in_residual() {
        let cfg = config();
        let p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seq = random_sequence(&mut rng, 3, 3, 4);
        let scores = forward(&p, &cfg, &seq).unwrap();
        // Residual only on segment 1.
        seq.targets = scores.clone();
        seq.targets[1] = scores[1] - 0.1;
        let (_, g1) = loss_and_grads(&p, &cfg, &[seq.clone()], None).unwrap();
        seq.targets[1] = scores[1] - 0.2;
        let (_, g2) = loss_and_grads(&p, &cfg, &[seq], None).unwrap();
        for (a, b) in g1.head_w.iter().zip(g2.head_w.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        assert!((2.0 * g1.head_b[[0, 0]] - g2.head_b[[0, 0]]).abs() < 1e-12);
    }

    #[test]
    fn dropout_changes_training_forward_only() {
        let cfg = ScorerConfig { dropout: 0.5, ..config() };
        let p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seq = random_sequence(&mut rng, 5, 5, 4);
        let eval_a = forward(&p, &cfg, &seq).unwrap();
        assert_eq!(eval_a, forward(&p, &cfg, &seq).unwrap());
        let (l1, _) = loss_and_grads(&p, &cfg, std::slice::from_ref(&seq), Some(DropoutSeed(1))).unwrap();
        let (l1b, _) = loss_and_grads(&p, &cfg, std::slice::from_ref(&seq), Some(DropoutSeed(1))).unwrap();
        let (l2, _) = loss_and_grads(&p, &cfg, std::slice::from_ref(&seq), Some(DropoutSeed(2))).unwrap();
        let (l0, _) = loss_and_grads(&p, &cfg, &[seq], None).unwrap();
        assert_eq!(l1, l1b);
        assert_ne!(l1, l2);
        assert_ne!(l1, l0);
    }

    #[test]
    fn shape_errors() {
        let cfg = config();
        let p = ScorerParams::init(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(forward(&p, &cfg, &random_sequence(&mut rng, 3, 3, 5)).is_err());
        assert!(forward(&p, &cfg, &random_sequence(&mut rng, 7, 7, 4)).is_err());
    }
}
