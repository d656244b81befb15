//! Trainable hash heads and the learnable proxy bank.
//!
//! Each modality owns one head: a fully-connected layer followed by dropout
//! (rate 0.2, train mode only) and tanh, producing binary-like codes in
//! (-1, 1)^K. A single proxy bank holds one learnable K-vector per category
//! and is shared by both modalities.

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, TAG_INIT};
use rand::Rng;
use rand_distr::StandardNormal;

/// Dropout rate applied between the fully-connected layer and tanh.
pub const DROPOUT_RATE: f64 = 0.2;

const DROPOUT_STREAM: u64 = 0x6472_6f70; // "drop"

/// Per-modality trainable map from features to binary-like codes.
#[derive(Debug, Clone, PartialEq)]
pub struct HashHead {
    input_dim: usize,
    code_length: usize,
    /// d×K, row-major by input dimension.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

/// One learnable proxy vector per label category (C×K, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyBank {
    categories: usize,
    code_length: usize,
    pub(crate) values: Vec<f64>,
}

/// Batch of tanh-relaxed codes, each entry strictly inside (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLikeCodes {
    rows: usize,
    code_length: usize,
    values: Vec<f64>,
}

/// Forward-pass mode. Train mode derives its dropout mask from (seed, step)
/// so every mask is reproducible.
#[derive(Debug, Clone, Copy)]
pub enum ForwardMode {
    Eval,
    Train { seed: u64, step: u64 },
}

/// Forward result plus the cached state needed for an exact backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub codes: BinaryLikeCodes,
    /// Per-entry dropout factor (0 or 1/keep); `None` in eval mode.
    mask_scale: Option<Vec<f64>>,
}

/// Gradients of a scalar loss with respect to one head's parameters.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
}

impl BinaryLikeCodes {
    pub fn from_values(rows: usize, code_length: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * code_length {
            return Err(Error::dim(
                "code values length",
                rows * code_length,
                values.len(),
            ));
        }
        Ok(Self {
            rows,
            code_length,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.code_length..(i + 1) * self.code_length]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ProxyBank {
    pub fn from_values(categories: usize, code_length: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != categories * code_length {
            return Err(Error::dim(
                "proxy values length",
                categories * code_length,
                values.len(),
            ));
        }
        Ok(Self {
            categories,
            code_length,
            values,
        })
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn proxy(&self, j: usize) -> &[f64] {
        &self.values[j * self.code_length..(j + 1) * self.code_length]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl HashHead {
    pub fn from_parts(
        input_dim: usize,
        code_length: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != input_dim * code_length {
            return Err(Error::dim(
                "head weights length",
                input_dim * code_length,
                weights.len(),
            ));
        }
        if bias.len() != code_length {
            return Err(Error::dim("head bias length", code_length, bias.len()));
        }
        Ok(Self {
            input_dim,
            code_length,
            weights,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn code_length(&self) -> usize {
        self.code_length
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Forward pass: `tanh(dropout(X W + b))`. Eval mode skips dropout;
    /// train mode uses an inverted mask (survivors scaled by 1/keep) drawn
    /// deterministically from (seed, step).
    pub fn forward(&self, x: &FeatureMatrix, mode: ForwardMode) -> Result<BinaryLikeCodes> {
        Ok(self.forward_cached(x, mode)?.codes)
    }

    /// Forward pass that also keeps the dropout mask for a later backward.
    pub fn forward_cached(&self, x: &FeatureMatrix, mode: ForwardMode) -> Result<ForwardCache> {
        if x.dim() != self.input_dim {
            return Err(Error::dim("head input dimension", self.input_dim, x.dim()));
        }
        let n = x.rows();
        let k = self.code_length;
        let mut pre = vec![0.0f64; n * k];
        for i in 0..n {
            let xi = x.row(i);
            let out = &mut pre[i * k..(i + 1) * k];
            out.copy_from_slice(&self.bias);
            for (r, &xv) in xi.iter().enumerate() {
                let xv = xv as f64;
                let wrow = &self.weights[r * k..(r + 1) * k];
                for (o, &w) in out.iter_mut().zip(wrow) {
                    *o += xv * w;
                }
            }
        }

        let mask_scale = match mode {
            ForwardMode::Eval => None,
            ForwardMode::Train { seed, step } => {
                let mut rng = seeded_rng(seed, DROPOUT_STREAM, step);
                let keep = 1.0 - DROPOUT_RATE;
                let scale: Vec<f64> = (0..n * k)
                    .map(|_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (p, &s) in pre.iter_mut().zip(&scale) {
                    *p *= s;
                }
                Some(scale)
            }
        };

        let values: Vec<f64> = pre.iter().map(|&z| z.tanh()).collect();
        Ok(ForwardCache {
            codes: BinaryLikeCodes::from_values(n, k, values)?,
            mask_scale,
        })
    }

    /// Backpropagate code gradients through tanh, the dropout mask, and the
    /// fully-connected layer.
    pub fn backward(
        &self,
        x: &FeatureMatrix,
        cache: &ForwardCache,
        d_codes: &[f64],
    ) -> HeadGradients {
        let n = x.rows();
        let k = self.code_length;
        debug_assert_eq!(d_codes.len(), n * k);
        let mut d_weights = vec![0.0f64; self.input_dim * k];
        let mut d_bias = vec![0.0f64; k];
        for i in 0..n {
            let h = cache.codes.row(i);
            let xi = x.row(i);
            let mut d_pre = vec![0.0f64; k];
            for j in 0..k {
                let mut g = d_codes[i * k + j] * (1.0 - h[j] * h[j]);
                if let Some(scale) = &cache.mask_scale {
                    g *= scale[i * k + j];
                }
                d_pre[j] = g;
                d_bias[j] += g;
            }
            for (r, &xv) in xi.iter().enumerate() {
                let xv = xv as f64;
                let wrow = &mut d_weights[r * k..(r + 1) * k];
                for (wg, &g) in wrow.iter_mut().zip(&d_pre) {
                    *wg += xv * g;
                }
            }
        }
        HeadGradients { d_weights, d_bias }
    }
}

/// Initialize both hash heads and the proxy bank.
///
/// Weights are uniform(-1/sqrt(d), 1/sqrt(d)), biases zero, and proxies drawn
/// uniformly on the unit K-sphere. Deterministic for a fixed seed.
pub fn init_model(
    input_dim: usize,
    code_length: usize,
    categories: usize,
    seed: u64,
) -> Result<(HashHead, HashHead, ProxyBank)> {
    if input_dim == 0 || code_length == 0 || categories == 0 {
        return Err(Error::InvalidConfig(
            "model dimensions must all be >= 1".to_string(),
        ));
    }
    let mut rng = seeded_rng(seed, TAG_INIT, 0);
    let bound = 1.0 / (input_dim as f64).sqrt();
    let draw_head = |rng: &mut rand_chacha::ChaCha8Rng| -> HashHead {
        let weights: Vec<f64> = (0..input_dim * code_length)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        HashHead {
            input_dim,
            code_length,
            weights,
            bias: vec![0.0; code_length],
        }
    };
    let head_x = draw_head(&mut rng);
    let head_y = draw_head(&mut rng);

    let mut values = Vec::with_capacity(categories * code_length);
    for _ in 0..categories {
        loop {
            let row: Vec<f64> = (0..code_length).map(|_| rng.sample(StandardNormal)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-9 {
                values.extend(row.iter().map(|v| v / norm));
                break;
            }
        }
    }
    let proxies = ProxyBank {
        categories,
        code_length,
        values,
    };
    Ok((head_x, head_y, proxies))
}
