//! Objective terms and their analytic gradients.
//!
//! Three families act on a mini-batch of binary-like codes from both
//! modalities:
//!
//! * proxy loss — pulls each code toward the proxies of its labels (negated
//!   cosine) and pushes it from irrelevant proxies (clamped cosine), averaged
//!   per relevant/irrelevant pair and summed over modalities;
//! * pairwise loss — hinge on the gap between label-cosine targets and code
//!   cosines for relevant pairs, clamped cosine for irrelevant pairs,
//!   averaged over modalities and ordered pairs (diagonal included), then
//!   weighted `alpha * pos + beta * neg`;
//! * variance constraint — per-sample population variance of the negated
//!   cosines to its relevant proxies, averaged over the batch and summed
//!   over modalities.
//!
//! Gradients are hand-derived with subgradient 0 at hinge kinks and are
//! verified against central finite differences (see `gradcheck`).

use crate::data::LabelMatrix;
use crate::error::{Error, Result};
use crate::model::{BinaryLikeCodes, ProxyBank};

/// Norm guard: norms are computed as sqrt(||v||^2 + EPS) so cosines stay
/// total even for near-zero codes early in training.
pub const NORM_EPS: f64 = 1e-12;

/// Nonnegative weights for the positive and negative pairwise terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.8,
        }
    }
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be finite and >= 0, got alpha={alpha} beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// Positive / negative pairwise terms and their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTerms {
    pub pos: f64,
    pub neg: f64,
    pub weighted: f64,
}

/// Value of every objective term for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub proxy: f64,
    pub pair_pos: f64,
    pub pair_neg: f64,
    pub pair_weighted: f64,
    pub variance: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.proxy.is_finite()
            && self.pair_pos.is_finite()
            && self.pair_neg.is_finite()
            && self.pair_weighted.is_finite()
            && self.variance.is_finite()
            && self.total.is_finite()
    }
}

/// Gradients of the selected objective with respect to every code entry and
/// proxy entry, flattened row-major.
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub d_codes_x: Vec<f64>,
    pub d_codes_y: Vec<f64>,
    pub d_proxies: Vec<f64>,
}

/// Which objective families participate (ablation switch).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermSelection {
    pub proxy: bool,
    pub pairwise: bool,
    pub variance: bool,
}

impl TermSelection {
    pub const ALL: TermSelection = TermSelection {
        proxy: true,
        pairwise: true,
        variance: true,
    };
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn guarded_norm(v: &[f64]) -> f64 {
    (dot(v, v) + NORM_EPS).sqrt()
}

/// Guarded cosine similarity.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (guarded_norm(a) * guarded_norm(b))
}

/// Attraction term for a relevant (code, proxy) pair: negated cosine.
pub fn cos_plus(h: &[f64], p: &[f64]) -> f64 {
    -cosine(h, p)
}

/// Repulsion term for an irrelevant (code, proxy) pair: cosine clamped at 0.
pub fn cos_minus(h: &[f64], p: &[f64]) -> f64 {
    cosine(h, p).max(0.0)
}

/// Cached per-pair cosine state reused by the gradient of the cosine.
struct CosinePair {
    c: f64,
    inv_norms: f64,   // 1 / (|u| |v|)
    inv_u_sq: f64,    // 1 / |u|^2
    inv_v_sq: f64,    // 1 / |v|^2
}

fn cosine_pair(u: &[f64], v: &[f64], nu: f64, nv: f64) -> CosinePair {
    let inv_norms = 1.0 / (nu * nv);
    CosinePair {
        c: dot(u, v) * inv_norms,
        inv_norms,
        inv_u_sq: 1.0 / (nu * nu),
        inv_v_sq: 1.0 / (nv * nv),
    }
}

/// Accumulate `w * d cos(u, v)` into the flat gradient buffers at row `iu`
/// of `gu` (first argument) and row `iv` of `gv` (second argument).
#[allow(clippy::too_many_arguments)]
fn accumulate_cosine_grad(
    u: &[f64],
    v: &[f64],
    pair: &CosinePair,
    w: f64,
    gu: &mut [f64],
    iu: usize,
    gv: &mut [f64],
    iv: usize,
) {
    let k = u.len();
    for t in 0..k {
        gu[iu * k + t] += w * (v[t] * pair.inv_norms - pair.c * u[t] * pair.inv_u_sq);
    }
    for t in 0..k {
        gv[iv * k + t] += w * (u[t] * pair.inv_norms - pair.c * v[t] * pair.inv_v_sq);
    }
}

/// Same as [`accumulate_cosine_grad`] but with both endpoint rows in one
/// buffer; handles the diagonal (iu == iv) by plain index accumulation.
fn accumulate_cosine_grad_same(
    u: &[f64],
    v: &[f64],
    pair: &CosinePair,
    w: f64,
    g: &mut [f64],
    iu: usize,
    iv: usize,
) {
    let k = u.len();
    for t in 0..k {
        g[iu * k + t] += w * (v[t] * pair.inv_norms - pair.c * u[t] * pair.inv_u_sq);
    }
    for t in 0..k {
        g[iv * k + t] += w * (u[t] * pair.inv_norms - pair.c * v[t] * pair.inv_v_sq);
    }
}

fn check_shapes(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
) -> Result<()> {
    if codes_x.rows() == 0 {
        return Err(Error::dim("batch size", 1, 0));
    }
    if codes_y.rows() != codes_x.rows() || labels.rows() != codes_x.rows() {
        return Err(Error::dim(
            "batch rows",
            codes_x.rows(),
            codes_y.rows().min(labels.rows()),
        ));
    }
    if codes_y.code_length() != codes_x.code_length()
        || proxies.code_length() != codes_x.code_length()
    {
        return Err(Error::dim(
            "code length",
            codes_x.code_length(),
            codes_y.code_length().min(proxies.code_length()),
        ));
    }
    if labels.categories() != proxies.categories() {
        return Err(Error::dim(
            "category count",
            proxies.categories(),
            labels.categories(),
        ));
    }
    Ok(())
}

fn row_norms(codes: &BinaryLikeCodes) -> Vec<f64> {
    (0..codes.rows()).map(|i| guarded_norm(codes.row(i))).collect()
}

fn proxy_norms(proxies: &ProxyBank) -> Vec<f64> {
    (0..proxies.categories())
        .map(|j| guarded_norm(proxies.proxy(j)))
        .collect()
}

/// Relevant/irrelevant pair counts over the batch (shared by both modalities).
fn pair_counts(labels: &LabelMatrix) -> (usize, usize) {
    let total = labels.rows() * labels.categories();
    let relevant: usize = (0..labels.rows()).map(|i| labels.row_weight(i)).sum();
    (relevant, total - relevant)
}

struct ProxyLossState<'a> {
    codes: [&'a BinaryLikeCodes; 2],
    norms: [Vec<f64>; 2],
    p_norms: Vec<f64>,
}

impl<'a> ProxyLossState<'a> {
    fn new(
        codes_x: &'a BinaryLikeCodes,
        codes_y: &'a BinaryLikeCodes,
        proxies: &ProxyBank,
    ) -> Self {
        Self {
            codes: [codes_x, codes_y],
            norms: [row_norms(codes_x), row_norms(codes_y)],
            p_norms: proxy_norms(proxies),
        }
    }
}

/// Proxy loss over both modalities.
pub fn proxy_loss(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
) -> Result<f64> {
    check_shapes(codes_x, codes_y, proxies, labels)?;
    let state = ProxyLossState::new(codes_x, codes_y, proxies);
    let (n_rel, n_irr) = pair_counts(labels);
    let mut total = 0.0;
    for m in 0..2 {
        let mut rel_sum = 0.0;
        let mut irr_sum = 0.0;
        for i in 0..labels.rows() {
            let h = state.codes[m].row(i);
            for j in 0..labels.categories() {
                let c = dot(h, proxies.proxy(j)) / (state.norms[m][i] * state.p_norms[j]);
                if labels.row(i)[j] == 1 {
                    rel_sum += -c;
                } else {
                    irr_sum += c.max(0.0);
                }
            }
        }
        if n_rel > 0 {
            total += rel_sum / n_rel as f64;
        }
        if n_irr > 0 {
            total += irr_sum / n_irr as f64;
        }
    }
    Ok(total)
}

fn proxy_loss_grad(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    d_codes: [&mut [f64]; 2],
    d_proxies: &mut [f64],
) -> f64 {
    let state = ProxyLossState::new(codes_x, codes_y, proxies);
    let (n_rel, n_irr) = pair_counts(labels);
    let mut total = 0.0;
    for (m, d_codes_m) in d_codes.into_iter().enumerate() {
        let mut rel_sum = 0.0;
        let mut irr_sum = 0.0;
        for i in 0..labels.rows() {
            let h = state.codes[m].row(i);
            for j in 0..labels.categories() {
                let p = proxies.proxy(j);
                let pair = cosine_pair(h, p, state.norms[m][i], state.p_norms[j]);
                if labels.row(i)[j] == 1 {
                    rel_sum += -pair.c;
                    if n_rel > 0 {
                        accumulate_cosine_grad(
                            h,
                            p,
                            &pair,
                            -1.0 / n_rel as f64,
                            d_codes_m,
                            i,
                            d_proxies,
                            j,
                        );
                    }
                } else {
                    irr_sum += pair.c.max(0.0);
                    if pair.c > 0.0 && n_irr > 0 {
                        accumulate_cosine_grad(
                            h,
                            p,
                            &pair,
                            1.0 / n_irr as f64,
                            d_codes_m,
                            i,
                            d_proxies,
                            j,
                        );
                    }
                }
            }
        }
        if n_rel > 0 {
            total += rel_sum / n_rel as f64;
        }
        if n_irr > 0 {
            total += irr_sum / n_irr as f64;
        }
    }
    total
}

fn check_similarity_block(n: usize, s_block: &[f64]) -> Result<()> {
    if s_block.len() != n * n {
        return Err(Error::dim("similarity block length", n * n, s_block.len()));
    }
    Ok(())
}

/// Pairwise loss over ordered pairs (diagonal included) and both modalities.
///
/// `s_block` is the batch's label-cosine block, row-major n×n. A batch with
/// no relevant (or no irrelevant) pairs contributes 0 for that term.
pub fn pairwise_loss(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    s_block: &[f64],
    weights: &LossWeights,
) -> Result<PairwiseTerms> {
    let n = codes_x.rows();
    if codes_y.rows() != n || codes_y.code_length() != codes_x.code_length() {
        return Err(Error::dim("batch rows", n, codes_y.rows()));
    }
    check_similarity_block(n, s_block)?;
    let norms = [row_norms(codes_x), row_norms(codes_y)];
    let codes = [codes_x, codes_y];

    let mut n_pos = 0usize;
    let mut n_neg = 0usize;
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = s_block[i * n + j];
            if s > 0.0 {
                n_pos += 1;
            } else {
                n_neg += 1;
            }
            for m in 0..2 {
                let c = dot(codes[m].row(i), codes[m].row(j)) / (norms[m][i] * norms[m][j]);
                if s > 0.0 {
                    pos_sum += (s - c).max(0.0);
                } else {
                    neg_sum += c.max(0.0);
                }
            }
        }
    }
    let pos = if n_pos > 0 {
        pos_sum / (2 * n_pos) as f64
    } else {
        0.0
    };
    let neg = if n_neg > 0 {
        neg_sum / (2 * n_neg) as f64
    } else {
        0.0
    };
    Ok(PairwiseTerms {
        pos,
        neg,
        weighted: weights.alpha * pos + weights.beta * neg,
    })
}

fn pairwise_loss_grad(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    s_block: &[f64],
    weights: &LossWeights,
    d_codes: [&mut [f64]; 2],
) -> PairwiseTerms {
    let n = codes_x.rows();
    let norms = [row_norms(codes_x), row_norms(codes_y)];
    let codes = [codes_x, codes_y];

    let mut n_pos = 0usize;
    let mut n_neg = 0usize;
    for i in 0..n {
        for j in 0..n {
            if s_block[i * n + j] > 0.0 {
                n_pos += 1;
            } else {
                n_neg += 1;
            }
        }
    }
    let pos_scale = if n_pos > 0 {
        weights.alpha / (2 * n_pos) as f64
    } else {
        0.0
    };
    let neg_scale = if n_neg > 0 {
        weights.beta / (2 * n_neg) as f64
    } else {
        0.0
    };

    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for (m, d_codes_m) in d_codes.into_iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let s = s_block[i * n + j];
                let hi = codes[m].row(i);
                let hj = codes[m].row(j);
                let pair = cosine_pair(hi, hj, norms[m][i], norms[m][j]);
                if s > 0.0 {
                    let margin = s - pair.c;
                    if margin > 0.0 {
                        pos_sum += margin;
                        // d/dh of (s - c) is -dc
                        accumulate_cosine_grad_same(hi, hj, &pair, -pos_scale, d_codes_m, i, j);
                    }
                } else if pair.c > 0.0 {
                    neg_sum += pair.c;
                    accumulate_cosine_grad_same(hi, hj, &pair, neg_scale, d_codes_m, i, j);
                }
            }
        }
    }
    let pos = if n_pos > 0 {
        pos_sum / (2 * n_pos) as f64
    } else {
        0.0
    };
    let neg = if n_neg > 0 {
        neg_sum / (2 * n_neg) as f64
    } else {
        0.0
    };
    PairwiseTerms {
        pos,
        neg,
        weighted: weights.alpha * pos + weights.beta * neg,
    }
}

/// Variance constraint over both modalities.
///
/// Single-label samples contribute exactly 0 (population variance of one
/// value).
pub fn variance_loss(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
) -> Result<f64> {
    check_shapes(codes_x, codes_y, proxies, labels)?;
    let state = ProxyLossState::new(codes_x, codes_y, proxies);
    let n = labels.rows();
    let mut total = 0.0;
    for m in 0..2 {
        let mut acc = 0.0;
        for i in 0..n {
            let h = state.codes[m].row(i);
            let mut dists = Vec::new();
            for j in 0..labels.categories() {
                if labels.row(i)[j] == 1 {
                    dists.push(-dot(h, proxies.proxy(j)) / (state.norms[m][i] * state.p_norms[j]));
                }
            }
            let u = dists.len() as f64;
            let mean = dists.iter().sum::<f64>() / u;
            acc += dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / u;
        }
        total += acc / n as f64;
    }
    Ok(total)
}

fn variance_loss_grad(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    d_codes: [&mut [f64]; 2],
    d_proxies: &mut [f64],
) -> f64 {
    let state = ProxyLossState::new(codes_x, codes_y, proxies);
    let n = labels.rows();
    let mut total = 0.0;
    for (m, d_codes_m) in d_codes.into_iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            let h = state.codes[m].row(i);
            let relevant: Vec<usize> = (0..labels.categories())
                .filter(|&j| labels.row(i)[j] == 1)
                .collect();
            let u = relevant.len() as f64;
            let pairs: Vec<CosinePair> = relevant
                .iter()
                .map(|&j| cosine_pair(h, proxies.proxy(j), state.norms[m][i], state.p_norms[j]))
                .collect();
            let dists: Vec<f64> = pairs.iter().map(|p| -p.c).collect();
            let mean = dists.iter().sum::<f64>() / u;
            acc += dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / u;
            // dVar/dt_j = 2 (t_j - mean) / U; t_j = -c, so chain in -1.
            for ((&j, pair), &t) in relevant.iter().zip(&pairs).zip(&dists) {
                let w = -2.0 * (t - mean) / (u * n as f64);
                accumulate_cosine_grad(
                    h,
                    proxies.proxy(j),
                    pair,
                    w,
                    d_codes_m,
                    i,
                    d_proxies,
                    j,
                );
            }
        }
        total += acc / n as f64;
    }
    total
}

/// All objective terms for one batch.
pub fn total_loss(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    s_block: &[f64],
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let proxy = proxy_loss(codes_x, codes_y, proxies, labels)?;
    let pair = pairwise_loss(codes_x, codes_y, s_block, weights)?;
    let variance = variance_loss(codes_x, codes_y, proxies, labels)?;
    Ok(LossBreakdown {
        proxy,
        pair_pos: pair.pos,
        pair_neg: pair.neg,
        pair_weighted: pair.weighted,
        variance,
        total: proxy + pair.weighted + variance,
    })
}

/// Gradients of the full objective (all three families).
pub fn loss_gradients(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    s_block: &[f64],
    weights: &LossWeights,
) -> Result<LossGradients> {
    Ok(objective_with_gradients(
        codes_x,
        codes_y,
        proxies,
        labels,
        s_block,
        weights,
        TermSelection::ALL,
    )?
    .1)
}

/// Evaluate the selected objective terms and their gradients in one pass.
///
/// Omitted families contribute exactly zero to both the breakdown and the
/// gradients, which makes ablation variants bit-identical to removing the
/// terms from the objective.
pub fn objective_with_gradients(
    codes_x: &BinaryLikeCodes,
    codes_y: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    s_block: &[f64],
    weights: &LossWeights,
    selection: TermSelection,
) -> Result<(LossBreakdown, LossGradients)> {
    check_shapes(codes_x, codes_y, proxies, labels)?;
    check_similarity_block(codes_x.rows(), s_block)?;
    let nk = codes_x.rows() * codes_x.code_length();
    let ck = proxies.categories() * proxies.code_length();
    let mut d_codes_x = vec![0.0; nk];
    let mut d_codes_y = vec![0.0; nk];
    let mut d_proxies = vec![0.0; ck];

    let proxy = if selection.proxy {
        proxy_loss_grad(
            codes_x,
            codes_y,
            proxies,
            labels,
            [&mut d_codes_x, &mut d_codes_y],
            &mut d_proxies,
        )
    } else {
        0.0
    };
    let pair = if selection.pairwise {
        pairwise_loss_grad(
            codes_x,
            codes_y,
            s_block,
            weights,
            [&mut d_codes_x, &mut d_codes_y],
        )
    } else {
        PairwiseTerms {
            pos: 0.0,
            neg: 0.0,
            weighted: 0.0,
        }
    };
    let variance = if selection.variance {
        variance_loss_grad(
            codes_x,
            codes_y,
            proxies,
            labels,
            [&mut d_codes_x, &mut d_codes_y],
            &mut d_proxies,
        )
    } else {
        0.0
    };

    let breakdown = LossBreakdown {
        proxy,
        pair_pos: pair.pos,
        pair_neg: pair.neg,
        pair_weighted: pair.weighted,
        variance,
        total: proxy + pair.weighted + variance,
    };
    Ok((
        breakdown,
        LossGradients {
            d_codes_x,
            d_codes_y,
            d_proxies,
        },
    ))
}
