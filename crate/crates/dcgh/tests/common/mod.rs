//! Brute-force oracles: independent nested-loop reimplementations of every
//! loss and metric, written for obviousness rather than speed. They share
//! only the documented formula definitions (including the 1e-12 norm guard)
//! with the library, never its code paths.

#![allow(dead_code)]

use dcgh::data::LabelMatrix;
use dcgh::encoder::BinaryCodeMatrix;
use dcgh::model::{BinaryLikeCodes, ProxyBank};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// loss oracles
// ---------------------------------------------------------------------------

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / ((na + 1e-12).sqrt() * (nb + 1e-12).sqrt())
}

pub fn oracle_proxy_loss(
    hx: &BinaryLikeCodes,
    hy: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
) -> f64 {
    let mut total = 0.0;
    for codes in [hx, hy] {
        let mut rel_sum = 0.0;
        let mut rel_count = 0usize;
        let mut irr_sum = 0.0;
        let mut irr_count = 0usize;
        for i in 0..labels.rows() {
            for j in 0..labels.categories() {
                let c = oracle_cosine(codes.row(i), proxies.proxy(j));
                if labels.row(i)[j] == 1 {
                    rel_sum += -c;
                    rel_count += 1;
                } else {
                    irr_sum += if c > 0.0 { c } else { 0.0 };
                    irr_count += 1;
                }
            }
        }
        if rel_count > 0 {
            total += rel_sum / rel_count as f64;
        }
        if irr_count > 0 {
            total += irr_sum / irr_count as f64;
        }
    }
    total
}

/// Returns (pos, neg, weighted) over ordered pairs including the diagonal,
/// averaged over the two modalities and the matching pair count.
pub fn oracle_pairwise_loss(
    hx: &BinaryLikeCodes,
    hy: &BinaryLikeCodes,
    s_block: &[f64],
    alpha: f64,
    beta: f64,
) -> (f64, f64, f64) {
    let n = hx.rows();
    let mut pos_sum = 0.0;
    let mut pos_count = 0usize;
    let mut neg_sum = 0.0;
    let mut neg_count = 0usize;
    for codes in [hx, hy] {
        for i in 0..n {
            for j in 0..n {
                let s = s_block[i * n + j];
                let c = oracle_cosine(codes.row(i), codes.row(j));
                if s > 0.0 {
                    let m = s - c;
                    pos_sum += if m > 0.0 { m } else { 0.0 };
                    pos_count += 1;
                } else {
                    neg_sum += if c > 0.0 { c } else { 0.0 };
                    neg_count += 1;
                }
            }
        }
    }
    let pos = if pos_count > 0 {
        pos_sum / pos_count as f64
    } else {
        0.0
    };
    let neg = if neg_count > 0 {
        neg_sum / neg_count as f64
    } else {
        0.0
    };
    (pos, neg, alpha * pos + beta * neg)
}

pub fn oracle_variance_loss(
    hx: &BinaryLikeCodes,
    hy: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
) -> f64 {
    let mut total = 0.0;
    for codes in [hx, hy] {
        let mut acc = 0.0;
        for i in 0..labels.rows() {
            let mut dists = Vec::new();
            for j in 0..labels.categories() {
                if labels.row(i)[j] == 1 {
                    dists.push(-oracle_cosine(codes.row(i), proxies.proxy(j)));
                }
            }
            let u = dists.len() as f64;
            let mean: f64 = dists.iter().sum::<f64>() / u;
            let mut var = 0.0;
            for d in &dists {
                var += (d - mean) * (d - mean);
            }
            acc += var / u;
        }
        total += acc / labels.rows() as f64;
    }
    total
}

pub fn oracle_total_loss(
    hx: &BinaryLikeCodes,
    hy: &BinaryLikeCodes,
    proxies: &ProxyBank,
    labels: &LabelMatrix,
    s_block: &[f64],
    alpha: f64,
    beta: f64,
) -> f64 {
    let (_, _, weighted) = oracle_pairwise_loss(hx, hy, s_block, alpha, beta);
    oracle_proxy_loss(hx, hy, proxies, labels)
        + weighted
        + oracle_variance_loss(hx, hy, proxies, labels)
}

// ---------------------------------------------------------------------------
// random instances
// ---------------------------------------------------------------------------

pub struct LossInstance {
    pub hx: BinaryLikeCodes,
    pub hy: BinaryLikeCodes,
    pub proxies: ProxyBank,
    pub labels: LabelMatrix,
    pub s_block: Vec<f64>,
}

pub fn random_loss_instance(rng: &mut ChaCha8Rng) -> LossInstance {
    let n = rng.gen_range(1..=8);
    let c = rng.gen_range(1..=5);
    let k = [8, 16][rng.gen_range(0..2)];
    let mut bits = vec![0u8; n * c];
    for row in 0..n {
        for col in 0..c {
            bits[row * c + col] = u8::from(rng.gen_bool(0.4));
        }
        if bits[row * c..(row + 1) * c].iter().all(|&b| b == 0) {
            bits[row * c + rng.gen_range(0..c)] = 1;
        }
    }
    let labels = LabelMatrix::from_values(n, c, bits).unwrap();
    let draw = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-0.9..0.9)).collect()
    };
    let hx = BinaryLikeCodes::from_values(n, k, draw(rng, n * k)).unwrap();
    let hy = BinaryLikeCodes::from_values(n, k, draw(rng, n * k)).unwrap();
    let proxies = ProxyBank::from_values(c, k, draw(rng, c * k)).unwrap();
    let s_block = dcgh::data::similarity_block(&labels);
    LossInstance {
        hx,
        hy,
        proxies,
        labels,
        s_block,
    }
}

// ---------------------------------------------------------------------------
// retrieval oracles (on unpacked ±1 codes)
// ---------------------------------------------------------------------------

pub struct NaiveTask {
    pub query_codes: Vec<Vec<i8>>,
    pub query_labels: Vec<Vec<u8>>,
    pub db_codes: Vec<Vec<i8>>,
    pub db_labels: Vec<Vec<u8>>,
}

pub fn naive_hamming(a: &[i8], b: &[i8]) -> u32 {
    let mut d = 0;
    for i in 0..a.len() {
        if a[i] != b[i] {
            d += 1;
        }
    }
    d
}

fn shared_labels(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(&x, &y)| x == 1 && y == 1).count()
}

/// Ranked db indices for one query: ascending (distance, index).
pub fn oracle_rank(task: &NaiveTask, q: usize) -> Vec<usize> {
    let mut order: Vec<(u32, usize)> = task
        .db_codes
        .iter()
        .enumerate()
        .map(|(d, code)| (naive_hamming(&task.query_codes[q], code), d))
        .collect();
    order.sort();
    order.into_iter().map(|(_, d)| d).collect()
}

fn oracle_ap_over_prefix(task: &NaiveTask, q: usize, prefix: &[usize]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &d) in prefix.iter().enumerate() {
        if shared_labels(&task.query_labels[q], &task.db_labels[d]) > 0 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

fn query_has_relevant(task: &NaiveTask, q: usize) -> bool {
    task.db_labels
        .iter()
        .any(|dl| shared_labels(&task.query_labels[q], dl) > 0)
}

/// mAP over full lists (or `top_k`), excluding queries with no relevant db
/// item; `None` when the metric is undefined.
pub fn oracle_map(task: &NaiveTask, top_k: Option<usize>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for q in 0..task.query_codes.len() {
        if !query_has_relevant(task, q) {
            continue;
        }
        let ranked = oracle_rank(task, q);
        let cutoff = top_k.unwrap_or(ranked.len()).min(ranked.len());
        sum += oracle_ap_over_prefix(task, q, &ranked[..cutoff]);
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

pub fn oracle_ndcg(task: &NaiveTask, k: usize) -> f64 {
    let mut total = 0.0;
    for q in 0..task.query_codes.len() {
        let ranked = oracle_rank(task, q);
        let cutoff = k.min(ranked.len());
        let mut dcg = 0.0;
        for (rank0, &d) in ranked[..cutoff].iter().enumerate() {
            let r = shared_labels(&task.query_labels[q], &task.db_labels[d]);
            dcg += (2f64.powi(r as i32) - 1.0) / ((rank0 + 2) as f64).log2();
        }
        let mut gains: Vec<usize> = task
            .db_labels
            .iter()
            .map(|dl| shared_labels(&task.query_labels[q], dl))
            .collect();
        gains.sort_unstable_by(|a, b| b.cmp(a));
        let mut idcg = 0.0;
        for (rank0, &r) in gains[..cutoff].iter().enumerate() {
            idcg += (2f64.powi(r as i32) - 1.0) / ((rank0 + 2) as f64).log2();
        }
        if idcg > 0.0 {
            total += dcg / idcg;
        }
    }
    total / task.query_codes.len() as f64
}

/// Raw (recall, precision) points per query; empty for queries with no
/// relevant db item.
pub fn oracle_pr_points(task: &NaiveTask) -> Vec<Vec<(f64, f64)>> {
    (0..task.query_codes.len())
        .map(|q| {
            if !query_has_relevant(task, q) {
                return Vec::new();
            }
            let total_rel = task
                .db_labels
                .iter()
                .filter(|dl| shared_labels(&task.query_labels[q], dl) > 0)
                .count();
            let ranked = oracle_rank(task, q);
            let mut cum = 0usize;
            ranked
                .iter()
                .enumerate()
                .map(|(rank0, &d)| {
                    if shared_labels(&task.query_labels[q], &task.db_labels[d]) > 0 {
                        cum += 1;
                    }
                    (
                        cum as f64 / total_rel as f64,
                        cum as f64 / (rank0 + 1) as f64,
                    )
                })
                .collect()
        })
        .collect()
}

pub fn oracle_topn(task: &NaiveTask, n_grid: &[usize]) -> Vec<f64> {
    n_grid
        .iter()
        .map(|&n| {
            let mut sum = 0.0;
            for q in 0..task.query_codes.len() {
                let ranked = oracle_rank(task, q);
                let rel = ranked[..n]
                    .iter()
                    .filter(|&&d| shared_labels(&task.query_labels[q], &task.db_labels[d]) > 0)
                    .count();
                sum += rel as f64 / n as f64;
            }
            sum / task.query_codes.len() as f64
        })
        .collect()
}

pub fn oracle_precision_at_radius(task: &NaiveTask, r: u32) -> f64 {
    let mut sum = 0.0;
    for q in 0..task.query_codes.len() {
        let mut within = 0usize;
        let mut rel = 0usize;
        for (d, code) in task.db_codes.iter().enumerate() {
            if naive_hamming(&task.query_codes[q], code) <= r {
                within += 1;
                if shared_labels(&task.query_labels[q], &task.db_labels[d]) > 0 {
                    rel += 1;
                }
            }
        }
        if within > 0 {
            sum += rel as f64 / within as f64;
        }
    }
    sum / task.query_codes.len() as f64
}

pub fn oracle_map_at_radius(task: &NaiveTask, r: u32) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for q in 0..task.query_codes.len() {
        if !query_has_relevant(task, q) {
            continue;
        }
        let ranked = oracle_rank(task, q);
        let within: Vec<usize> = ranked
            .into_iter()
            .filter(|&d| naive_hamming(&task.query_codes[q], &task.db_codes[d]) <= r)
            .collect();
        sum += oracle_ap_over_prefix(task, q, &within);
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

// ---------------------------------------------------------------------------
// random tasks
// ---------------------------------------------------------------------------

pub fn random_task(rng: &mut ChaCha8Rng, max_side: usize) -> NaiveTask {
    let n_query = rng.gen_range(1..=max_side);
    let n_db = rng.gen_range(1..=max_side);
    let c = rng.gen_range(2..=5);
    let k = [16, 32, 64][rng.gen_range(0..3)];
    let draw_codes = |rng: &mut ChaCha8Rng, rows: usize| -> Vec<Vec<i8>> {
        (0..rows)
            .map(|_| {
                (0..k)
                    .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
                    .collect()
            })
            .collect()
    };
    let draw_labels = |rng: &mut ChaCha8Rng, rows: usize| -> Vec<Vec<u8>> {
        (0..rows)
            .map(|_| {
                let mut row: Vec<u8> = (0..c).map(|_| u8::from(rng.gen_bool(0.35))).collect();
                if row.iter().all(|&b| b == 0) {
                    let idx = rng.gen_range(0..c);
                    row[idx] = 1;
                }
                row
            })
            .collect()
    };
    NaiveTask {
        query_codes: draw_codes(rng, n_query),
        query_labels: draw_labels(rng, n_query),
        db_codes: draw_codes(rng, n_db),
        db_labels: draw_labels(rng, n_db),
    }
}

/// Pack a naive task into the library's task type.
pub fn to_retrieval_task(task: &NaiveTask, direction: dcgh::eval::Direction) -> dcgh::eval::RetrievalTask {
    let k = task.query_codes[0].len();
    let c = task.query_labels[0].len();
    let pack = |rows: &[Vec<i8>]| BinaryCodeMatrix::pack_rows(k, rows).unwrap();
    let labels = |rows: &[Vec<u8>]| {
        LabelMatrix::from_values(
            rows.len(),
            c,
            rows.iter().flatten().copied().collect::<Vec<u8>>(),
        )
        .unwrap()
    };
    dcgh::eval::RetrievalTask::new(
        pack(&task.query_codes),
        labels(&task.query_labels),
        pack(&task.db_codes),
        labels(&task.db_labels),
        direction,
    )
    .unwrap()
}
