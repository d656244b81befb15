//! Mini-batch training of both hash heads and the proxy bank.
//!
//! Each step forwards a batch through both heads (train-mode dropout),
//! evaluates the selected objective terms on the batch with the batch's
//! label-cosine block, backpropagates through tanh/dropout/fc, and applies
//! Adam updates to the head parameters and the proxies. Everything is
//! deterministic for a fixed config: shuffles, dropout masks, and reduction
//! order are all seeded.

use crate::data::{similarity_block, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::losses::{objective_with_gradients, LossBreakdown, LossWeights, TermSelection};
use crate::model::{init_model, ForwardMode, HashHead, ProxyBank};
use crate::rng::{seeded_rng, stream_seed, TAG_DROPOUT_X, TAG_DROPOUT_Y, TAG_SHUFFLE};
use rand::seq::SliceRandom;
use std::time::Instant;

/// Objective variant: the full objective or one of the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// proxy + weighted pairwise + variance
    Full,
    /// proxy loss only
    ProxyOnly,
    /// pairwise loss only, with alpha = beta = 1
    PairwiseOnly,
    /// proxy + weighted pairwise, no variance constraint
    NoVariance,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "pv" => Ok(Variant::ProxyOnly),
            "xv" => Ok(Variant::PairwiseOnly),
            "v" => Ok(Variant::NoVariance),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?}; expected full|pv|xv|v"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::ProxyOnly => "pv",
            Variant::PairwiseOnly => "xv",
            Variant::NoVariance => "v",
        }
    }

    pub fn selection(&self) -> TermSelection {
        match self {
            Variant::Full => TermSelection {
                proxy: true,
                pairwise: true,
                variance: true,
            },
            Variant::ProxyOnly => TermSelection {
                proxy: true,
                pairwise: false,
                variance: false,
            },
            Variant::PairwiseOnly => TermSelection {
                proxy: false,
                pairwise: true,
                variance: false,
            },
            Variant::NoVariance => TermSelection {
                proxy: true,
                pairwise: true,
                variance: false,
            },
        }
    }

    /// Effective pairwise weights: the pairwise-only ablation drops the
    /// small-weight scheme and uses alpha = beta = 1.
    pub fn effective_weights(&self, alpha: f64, beta: f64) -> LossWeights {
        match self {
            Variant::PairwiseOnly => LossWeights {
                alpha: 1.0,
                beta: 1.0,
            },
            _ => LossWeights { alpha, beta },
        }
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub code_length: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub variant: Variant,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            code_length: 16,
            epochs: 300,
            batch_size: 128,
            learning_rate: 0.001,
            alpha: 0.05,
            beta: 0.8,
            seed: 0,
            variant: Variant::Full,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.code_length == 0 {
            return Err(Error::InvalidConfig("code_length must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        LossWeights::new(self.alpha, self.beta)?;
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidConfig(
                "adam betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Adam moment accumulators for a fixed list of parameter tensors, plus the
/// shared step counter used for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn tensors(&self) -> usize {
        self.m.len()
    }

    pub fn moments(&self, tensor: usize) -> (&[f64], &[f64]) {
        (&self.m[tensor], &self.v[tensor])
    }

    pub(crate) fn from_parts(
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step,
            m,
            v,
        }
    }

    /// Advance the shared step counter. Call once per optimization step,
    /// before updating the step's tensors.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Apply one bias-corrected Adam update to a single tensor.
    pub fn update(&mut self, tensor: usize, lr: f64, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m[tensor].len(), "tensor shape mismatch");
        assert_eq!(grads.len(), params.len(), "gradient shape mismatch");
        let m = &mut self.m[tensor];
        let v = &mut self.v[tensor];
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Single-tensor Adam step: advances the counter and updates `params`.
pub fn adam_step(state: &mut AdamState, lr: f64, params: &mut [f64], grads: &[f64]) {
    state.begin_step();
    state.update(0, lr, params, grads);
}

/// Deterministic epoch shuffle chunked into batches; the final short batch
/// is kept.
pub fn shuffle_batches(n: usize, batch_size: usize, epoch: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed, TAG_SHUFFLE, epoch as u64);
    order.shuffle(&mut rng);
    order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// Loss values logged for one optimization step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub losses: LossBreakdown,
}

/// Per-epoch aggregates: mean loss over the epoch's steps plus wall-clock.
#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_losses: LossBreakdown,
    pub seconds: f64,
}

/// Full training trace.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// Serialize the per-step trace as CSV
    /// (`epoch,step,proxy,pair_pos,pair_neg,variance,total`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,proxy,pair_pos,pair_neg,variance,total\n");
        for r in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch,
                r.step,
                r.losses.proxy,
                r.losses.pair_pos,
                r.losses.pair_neg,
                r.losses.variance,
                r.losses.total
            ));
        }
        out
    }
}

/// Trained parameters plus the report.
pub struct TrainOutcome {
    pub head_x: HashHead,
    pub head_y: HashHead,
    pub proxies: ProxyBank,
    pub adam: AdamState,
    pub report: TrainReport,
}

fn mean_breakdown(records: &[StepRecord]) -> LossBreakdown {
    let n = records.len().max(1) as f64;
    let mut acc = LossBreakdown {
        proxy: 0.0,
        pair_pos: 0.0,
        pair_neg: 0.0,
        pair_weighted: 0.0,
        variance: 0.0,
        total: 0.0,
    };
    for r in records {
        acc.proxy += r.losses.proxy;
        acc.pair_pos += r.losses.pair_pos;
        acc.pair_neg += r.losses.pair_neg;
        acc.pair_weighted += r.losses.pair_weighted;
        acc.variance += r.losses.variance;
        acc.total += r.losses.total;
    }
    acc.proxy /= n;
    acc.pair_pos /= n;
    acc.pair_neg /= n;
    acc.pair_weighted /= n;
    acc.variance /= n;
    acc.total /= n;
    acc
}

/// Run the training loop on row-aligned feature/label matrices.
pub fn train(
    cfg: &TrainConfig,
    features_x: &FeatureMatrix,
    features_y: &FeatureMatrix,
    labels: &LabelMatrix,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = features_x.rows();
    if features_y.rows() != n || labels.rows() != n {
        return Err(Error::dim(
            "row-aligned inputs",
            n,
            features_y.rows().min(labels.rows()),
        ));
    }
    if features_x.dim() != features_y.dim() {
        return Err(Error::dim(
            "modality feature dimension",
            features_x.dim(),
            features_y.dim(),
        ));
    }

    let d = features_x.dim();
    let k = cfg.code_length;
    let c = labels.categories();
    let (mut head_x, mut head_y, mut proxies) = init_model(d, k, c, cfg.seed)?;
    let mut adam = AdamState::new(
        &[d * k, k, d * k, k, c * k],
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );

    let weights = cfg.variant.effective_weights(cfg.alpha, cfg.beta);
    let selection = cfg.variant.selection();
    let dropout_seed_x = stream_seed(cfg.seed, TAG_DROPOUT_X);
    let dropout_seed_y = stream_seed(cfg.seed, TAG_DROPOUT_Y);

    let mut report = TrainReport::default();
    let mut global_step = 0usize;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_start = report.steps.len();
        for batch in shuffle_batches(n, cfg.batch_size, epoch, cfg.seed) {
            let xb = features_x.gather(&batch);
            let yb = features_y.gather(&batch);
            let lb = labels.gather(&batch);
            let s_block = similarity_block(&lb);

            let fx = head_x.forward_cached(
                &xb,
                ForwardMode::Train {
                    seed: dropout_seed_x,
                    step: global_step as u64,
                },
            )?;
            let fy = head_y.forward_cached(
                &yb,
                ForwardMode::Train {
                    seed: dropout_seed_y,
                    step: global_step as u64,
                },
            )?;

            let (losses, grads) = objective_with_gradients(
                &fx.codes, &fy.codes, &proxies, &lb, &s_block, &weights, selection,
            )?;
            if !losses.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step: global_step,
                });
            }

            let gx = head_x.backward(&xb, &fx, &grads.d_codes_x);
            let gy = head_y.backward(&yb, &fy, &grads.d_codes_y);

            adam.begin_step();
            adam.update(0, cfg.learning_rate, &mut head_x.weights, &gx.d_weights);
            adam.update(1, cfg.learning_rate, &mut head_x.bias, &gx.d_bias);
            adam.update(2, cfg.learning_rate, &mut head_y.weights, &gy.d_weights);
            adam.update(3, cfg.learning_rate, &mut head_y.bias, &gy.d_bias);
            adam.update(
                4,
                cfg.learning_rate,
                proxies.values_mut(),
                &grads.d_proxies,
            );

            report.steps.push(StepRecord {
                epoch,
                step: global_step,
                losses,
            });
            global_step += 1;
        }
        report.epochs.push(EpochRecord {
            epoch,
            mean_losses: mean_breakdown(&report.steps[epoch_start..]),
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok(TrainOutcome {
        head_x,
        head_y,
        proxies,
        adam,
        report,
    })
}
