use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ScorerConfig;
use crate::{Error, Result};

/// One encoder block. Biases and norm parameters are `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_gain: Array2<f64>,
    pub ln1_bias: Array2<f64>,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_gain: Array2<f64>,
    pub ln2_bias: Array2<f64>,
    pub ff_w1: Array2<f64>,
    pub ff_b1: Array2<f64>,
    pub ff_w2: Array2<f64>,
    pub ff_b2: Array2<f64>,
}

/// Every learnable tensor of the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    /// Text fuser, `D -> D -> D`.
    pub fuse_w1: Array2<f64>,
    pub fuse_b1: Array2<f64>,
    pub fuse_w2: Array2<f64>,
    pub fuse_b2: Array2<f64>,
    /// `2D -> d_model` over `[video | fused text]`.
    pub input_w: Array2<f64>,
    pub input_b: Array2<f64>,
    /// `max_segments x d_model`.
    pub positional: Array2<f64>,
    pub layers: Vec<LayerParams>,
    /// `d_model -> 1`.
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

/// Generates ordered, named accessors over a parameter struct's tensors.
macro_rules! tensor_fields {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl $ty {
            fn fields(&self) -> Vec<(&'static str, &Array2<f64>)> {
                vec![$((stringify!($f), &self.$f)),*]
            }

            fn fields_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
                vec![$((stringify!($f), &mut self.$f)),*]
            }
        }
    };
}

tensor_fields!(LayerParams {
    ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gain, ln2_bias, ff_w1, ff_b1, ff_w2, ff_b2,
});

/// Names of the tensors ahead of the layer stack.
const LEADING: [&str; 7] = [
    "fuse_w1", "fuse_b1", "fuse_w2", "fuse_b2", "input_w", "input_b", "positional",
];

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let std = (2.0 / (rows + cols) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn row(n: usize, value: f64) -> Array2<f64> {
    Array2::from_elem((1, n), value)
}

impl ScorerParams {
    /// Random initialization for token inputs of width `input_dim`.
    pub fn init(config: &ScorerConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, dm) = (input_dim, config.d_model);
        let hidden = 4 * dm;
        let pos_dist = Normal::new(0.0, 0.02).expect("positive std");
        let mut p = ScorerParams {
            fuse_w1: xavier(&mut rng, d, d),
            fuse_b1: row(d, 0.0),
            fuse_w2: xavier(&mut rng, d, d),
            fuse_b2: row(d, 0.0),
            input_w: xavier(&mut rng, 2 * d, dm),
            input_b: row(dm, 0.0),
            positional: Array2::zeros((config.max_segments, dm)),
            layers: Vec::with_capacity(config.n_layers),
            head_w: xavier(&mut rng, dm, 1),
            head_b: row(1, 0.0),
        };
        p.positional
            .iter_mut()
            .for_each(|x| *x = pos_dist.sample(&mut rng));
        for _ in 0..config.n_layers {
            p.layers.push(LayerParams {
                ln1_gain: row(dm, 1.0),
                ln1_bias: row(dm, 0.0),
                wq: xavier(&mut rng, dm, dm),
                bq: row(dm, 0.0),
                wk: xavier(&mut rng, dm, dm),
                bk: row(dm, 0.0),
                wv: xavier(&mut rng, dm, dm),
                bv: row(dm, 0.0),
                wo: xavier(&mut rng, dm, dm),
                bo: row(dm, 0.0),
                ln2_gain: row(dm, 1.0),
                ln2_bias: row(dm, 0.0),
                ff_w1: xavier(&mut rng, dm, hidden),
                ff_b1: row(hidden, 0.0),
                ff_w2: xavier(&mut rng, hidden, dm),
                ff_b2: row(dm, 0.0),
            });
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.fuse_w1.nrows()
    }

    pub fn d_model(&self) -> usize {
        self.input_w.ncols()
    }

    pub fn max_segments(&self) -> usize {
        self.positional.nrows()
    }

    /// All tensors with stable names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let before = [
            &self.fuse_w1,
            &self.fuse_b1,
            &self.fuse_w2,
            &self.fuse_b2,
            &self.input_w,
            &self.input_b,
            &self.positional,
        ];
        let mut out: Vec<(String, &Array2<f64>)> = LEADING
            .iter()
            .map(|n| n.to_string())
            .zip(before)
            .collect();
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend(layer.fields().into_iter().map(|(n, t)| (format!("layers.{l}.{n}"), t)));
        }
        out.push(("head_w".into(), &self.head_w));
        out.push(("head_b".into(), &self.head_b));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let before = [
            &mut self.fuse_w1,
            &mut self.fuse_b1,
            &mut self.fuse_w2,
            &mut self.fuse_b2,
            &mut self.input_w,
            &mut self.input_b,
            &mut self.positional,
        ];
        let mut out: Vec<(String, &mut Array2<f64>)> = LEADING
            .iter()
            .map(|n| n.to_string())
            .zip(before)
            .collect();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.extend(layer.fields_mut().into_iter().map(|(n, t)| (format!("layers.{l}.{n}"), t)));
        }
        out.push(("head_w".into(), &mut self.head_w));
        out.push(("head_b".into(), &mut self.head_b));
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.named_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ScorerParams) {
        for ((_, a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    /// Names the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }

    /// Checks shapes against a config and input width.
    pub fn check_shapes(&self, config: &ScorerConfig) -> Result<()> {
        let expected = ScorerParams::init(
            &ScorerConfig {
                seed: 0,
                ..config.clone()
            },
            self.input_dim(),
        )?;
        let ours = self.named();
        let theirs = expected.named();
        if ours.len() != theirs.len() {
            return Err(Error::Config(format!(
                "parameters hold {} tensors, config implies {}",
                ours.len(),
                theirs.len()
            )));
        }
        for ((name, a), (_, b)) in ours.iter().zip(&theirs) {
            if a.dim() != b.dim() {
                return Err(Error::Config(format!(
                    "tensor {name} has shape {:?}, config implies {:?}",
                    a.dim(),
                    b.dim()
                )));
            }
        }
        Ok(())
    }
}
