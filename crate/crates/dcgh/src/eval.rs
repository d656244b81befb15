//! Hamming-space retrieval and ranking metrics.
//!
//! Retrieval is an exhaustive XOR + popcount scan over bit-packed codes;
//! per-query work runs in parallel and every final reduction uses a fixed
//! order, so results are deterministic. Relevance for binary metrics is
//! "shares at least one label"; NDCG uses graded relevance (the size of the
//! label intersection).
//!
//! Conventions: queries with no relevant database item are excluded from mAP
//! averaging (their AP is undefined); an empty Hamming ball contributes 0 to
//! radius-restricted precision and mAP; ranking ties break toward the lower
//! database index.

use crate::data::LabelMatrix;
use crate::encoder::BinaryCodeMatrix;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::Path;

/// Retrieval direction, named from the query side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Img2Txt,
    Txt2Img,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Img2Txt => write!(f, "Img2Txt"),
            Direction::Txt2Img => write!(f, "Txt2Img"),
        }
    }
}

impl Direction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Img2Txt" | "img2txt" | "i2t" => Ok(Direction::Img2Txt),
            "Txt2Img" | "txt2img" | "t2i" => Ok(Direction::Txt2Img),
            other => Err(Error::InvalidConfig(format!(
                "unknown direction {other:?}; expected Img2Txt or Txt2Img"
            ))),
        }
    }
}

/// One side's codes and labels plus the direction tag.
pub struct RetrievalTask {
    pub queries: BinaryCodeMatrix,
    pub query_labels: LabelMatrix,
    pub db: BinaryCodeMatrix,
    pub db_labels: LabelMatrix,
    pub direction: Direction,
}

impl RetrievalTask {
    pub fn new(
        queries: BinaryCodeMatrix,
        query_labels: LabelMatrix,
        db: BinaryCodeMatrix,
        db_labels: LabelMatrix,
        direction: Direction,
    ) -> Result<Self> {
        if queries.rows() == 0 {
            return Err(Error::EmptyQuerySet);
        }
        if queries.code_length() != db.code_length() {
            return Err(Error::dim(
                "code length",
                queries.code_length(),
                db.code_length(),
            ));
        }
        if query_labels.rows() != queries.rows() {
            return Err(Error::dim("query labels", queries.rows(), query_labels.rows()));
        }
        if db_labels.rows() != db.rows() {
            return Err(Error::dim("db labels", db.rows(), db_labels.rows()));
        }
        if query_labels.categories() != db_labels.categories() {
            return Err(Error::dim(
                "label categories",
                query_labels.categories(),
                db_labels.categories(),
            ));
        }
        Ok(Self {
            queries,
            query_labels,
            db,
            db_labels,
            direction,
        })
    }

    fn shared(&self, q: usize, d: usize) -> usize {
        self.query_labels.shared_with(q, &self.db_labels, d)
    }

    fn relevant(&self, q: usize, d: usize) -> bool {
        self.shared(q, d) > 0
    }

    fn total_relevant(&self, q: usize) -> usize {
        (0..self.db.rows()).filter(|&d| self.relevant(q, d)).count()
    }
}

/// Hamming distance between two packed rows over the first `k` bits.
/// Padding bits are zero on both sides, so a plain word-wise XOR suffices.
pub fn hamming_distance(a: &[u64], b: &[u64], k: usize) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), k.div_ceil(64));
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x ^ y).count_ones())
        .sum()
}

/// Database ranking for one query: indices by ascending distance, ties
/// broken by ascending index; `distances[r]` belongs to `indices[r]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub indices: Vec<u32>,
    pub distances: Vec<u32>,
}

fn rank_one(task: &RetrievalTask, q: usize) -> RankedList {
    let qrow = task.queries.word_row(q);
    let k = task.queries.code_length();
    let mut order: Vec<(u32, u32)> = (0..task.db.rows() as u32)
        .map(|d| (hamming_distance(qrow, task.db.word_row(d as usize), k), d))
        .collect();
    order.sort_unstable();
    RankedList {
        indices: order.iter().map(|&(_, d)| d).collect(),
        distances: order.iter().map(|&(dist, _)| dist).collect(),
    }
}

/// Rank the whole database for every query.
pub fn rank_all(task: &RetrievalTask) -> Vec<RankedList> {
    (0..task.queries.rows())
        .into_par_iter()
        .map(|q| rank_one(task, q))
        .collect()
}

fn average_precision(task: &RetrievalTask, q: usize, list: &RankedList, top_k: usize) -> f64 {
    let mut cum_rel = 0usize;
    let mut sum = 0.0;
    for (rank0, &d) in list.indices.iter().take(top_k).enumerate() {
        if task.relevant(q, d as usize) {
            cum_rel += 1;
            sum += cum_rel as f64 / (rank0 + 1) as f64;
        }
    }
    if cum_rel == 0 {
        0.0
    } else {
        sum / cum_rel as f64
    }
}

/// Mean average precision over the full list or the top `top_k` positions.
///
/// AP for one query is the mean of precision-at-rank over the relevant
/// positions inside the evaluated prefix; a query whose prefix holds no
/// relevant item scores 0. Queries with no relevant database item at all are
/// excluded; if that removes every query the metric is undefined.
pub fn mean_average_precision(task: &RetrievalTask, top_k: Option<usize>) -> Result<f64> {
    let lists = rank_all(task);
    let cutoff = top_k.unwrap_or(task.db.rows()).min(task.db.rows());
    let aps: Vec<Option<f64>> = (0..task.queries.rows())
        .into_par_iter()
        .map(|q| {
            if task.total_relevant(q) == 0 {
                None
            } else {
                Some(average_precision(task, q, &lists[q], cutoff))
            }
        })
        .collect();
    let mut count = 0usize;
    let mut sum = 0.0;
    for ap in aps.into_iter().flatten() {
        count += 1;
        sum += ap;
    }
    if count == 0 {
        return Err(Error::UndefinedMap);
    }
    Ok(sum / count as f64)
}

fn dcg(gains: impl Iterator<Item = usize>) -> f64 {
    gains
        .enumerate()
        .map(|(rank0, r)| (2f64.powi(r as i32) - 1.0) / ((rank0 + 2) as f64).log2())
        .sum()
}

/// NDCG over the top `k` positions with graded relevance (shared-label
/// count); queries with an all-zero ideal ranking score 0.
pub fn ndcg_at_k(task: &RetrievalTask, k: usize) -> f64 {
    let lists = rank_all(task);
    let cutoff = k.min(task.db.rows());
    let scores: Vec<f64> = (0..task.queries.rows())
        .into_par_iter()
        .map(|q| {
            let list = &lists[q];
            let actual = dcg(
                list.indices
                    .iter()
                    .take(cutoff)
                    .map(|&d| task.shared(q, d as usize)),
            );
            let mut ideal_gains: Vec<usize> =
                (0..task.db.rows()).map(|d| task.shared(q, d)).collect();
            ideal_gains.sort_unstable_by(|a, b| b.cmp(a));
            let ideal = dcg(ideal_gains.into_iter().take(cutoff));
            if ideal == 0.0 {
                0.0
            } else {
                actual / ideal
            }
        })
        .collect();
    scores.iter().sum::<f64>() / task.queries.rows() as f64
}

/// A plotted curve; x is strictly increasing.
#[derive(Debug, Clone, Serialize)]
pub struct CurveSeries {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

/// Raw (recall, precision) points per query at every rank cutoff, before any
/// interpolation. Queries with no relevant database item yield an empty list.
pub fn pr_raw_points(task: &RetrievalTask) -> Vec<Vec<(f64, f64)>> {
    let lists = rank_all(task);
    (0..task.queries.rows())
        .into_par_iter()
        .map(|q| {
            let total = task.total_relevant(q);
            if total == 0 {
                return Vec::new();
            }
            let list = &lists[q];
            let mut cum = 0usize;
            list.indices
                .iter()
                .enumerate()
                .map(|(rank0, &d)| {
                    if task.relevant(q, d as usize) {
                        cum += 1;
                    }
                    (cum as f64 / total as f64, cum as f64 / (rank0 + 1) as f64)
                })
                .collect()
        })
        .collect()
}

/// Precision-recall curve averaged across queries on a fixed 101-point
/// recall grid with interpolated precision (max precision at recall >= t).
pub fn precision_recall_curve(task: &RetrievalTask) -> Result<CurveSeries> {
    let raw = pr_raw_points(task);
    let used: Vec<&Vec<(f64, f64)>> = raw.iter().filter(|p| !p.is_empty()).collect();
    if used.is_empty() {
        return Err(Error::UndefinedMap);
    }
    let mut points = Vec::with_capacity(101);
    for grid in 0..=100 {
        let t = grid as f64 / 100.0;
        let mut mean = 0.0;
        for pts in &used {
            let best = pts
                .iter()
                .filter(|(recall, _)| *recall >= t - 1e-12)
                .map(|&(_, prec)| prec)
                .fold(0.0f64, f64::max);
            mean += best;
        }
        points.push((t, mean / used.len() as f64));
    }
    Ok(CurveSeries {
        x_label: "recall".to_string(),
        y_label: "precision".to_string(),
        points,
    })
}

/// Mean precision@n across queries for each n in the grid.
pub fn topn_precision_curve(task: &RetrievalTask, n_grid: &[usize]) -> Result<CurveSeries> {
    for window in n_grid.windows(2) {
        if window[1] <= window[0] {
            return Err(Error::InvalidConfig(
                "top-n grid must be strictly increasing".to_string(),
            ));
        }
    }
    if n_grid.iter().any(|&n| n == 0 || n > task.db.rows()) {
        return Err(Error::InvalidConfig(format!(
            "top-n grid must lie in [1, {}]",
            task.db.rows()
        )));
    }
    let lists = rank_all(task);
    let points: Vec<(f64, f64)> = n_grid
        .iter()
        .map(|&n| {
            let mean: f64 = (0..task.queries.rows())
                .map(|q| {
                    let rel = lists[q]
                        .indices
                        .iter()
                        .take(n)
                        .filter(|&&d| task.relevant(q, d as usize))
                        .count();
                    rel as f64 / n as f64
                })
                .sum::<f64>()
                / task.queries.rows() as f64;
            (n as f64, mean)
        })
        .collect();
    Ok(CurveSeries {
        x_label: "n".to_string(),
        y_label: "precision".to_string(),
        points,
    })
}

/// Precision restricted to the Hamming ball of radius `r`; empty balls
/// contribute 0.
pub fn precision_at_radius(task: &RetrievalTask, r: u32) -> f64 {
    let lists = rank_all(task);
    let per_query: Vec<f64> = (0..task.queries.rows())
        .into_par_iter()
        .map(|q| {
            let list = &lists[q];
            let within = list.distances.partition_point(|&d| d <= r);
            if within == 0 {
                return 0.0;
            }
            let rel = list.indices[..within]
                .iter()
                .filter(|&&d| task.relevant(q, d as usize))
                .count();
            rel as f64 / within as f64
        })
        .collect();
    per_query.iter().sum::<f64>() / task.queries.rows() as f64
}

/// mAP over lists truncated to the Hamming ball of radius `r`, with the same
/// empty-ball (0) and no-relevant-item (excluded) conventions.
pub fn map_at_radius(task: &RetrievalTask, r: u32) -> Result<f64> {
    let lists = rank_all(task);
    let aps: Vec<Option<f64>> = (0..task.queries.rows())
        .into_par_iter()
        .map(|q| {
            if task.total_relevant(q) == 0 {
                return None;
            }
            let list = &lists[q];
            let within = list.distances.partition_point(|&d| d <= r);
            Some(average_precision(task, q, list, within))
        })
        .collect();
    let mut count = 0usize;
    let mut sum = 0.0;
    for ap in aps.into_iter().flatten() {
        count += 1;
        sum += ap;
    }
    if count == 0 {
        return Err(Error::UndefinedMap);
    }
    Ok(sum / count as f64)
}

/// Metric bundle for one retrieval direction.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub direction: Direction,
    pub k: usize,
    pub map: f64,
    pub ndcg_at_1000: f64,
    pub precision_at_h2: f64,
    pub map_at_h2: f64,
    pub pr_curve: CurveSeries,
    pub topn_curve: CurveSeries,
}

/// Default top-n grid: up to 20 roughly even cutoffs over the database size.
pub fn default_topn_grid(db_size: usize) -> Vec<usize> {
    let step = (db_size / 20).max(1);
    let mut grid: Vec<usize> = (1..=db_size).step_by(step).collect();
    if *grid.last().unwrap() != db_size {
        grid.push(db_size);
    }
    grid
}

/// Compute the full metric bundle for a task.
pub fn evaluate(task: &RetrievalTask) -> Result<MetricReport> {
    Ok(MetricReport {
        direction: task.direction,
        k: task.queries.code_length(),
        map: mean_average_precision(task, None)?,
        ndcg_at_1000: ndcg_at_k(task, 1000),
        precision_at_h2: precision_at_radius(task, 2),
        map_at_h2: map_at_radius(task, 2)?,
        pr_curve: precision_recall_curve(task)?,
        topn_curve: topn_precision_curve(task, &default_topn_grid(task.db.rows()))?,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Write a curve as a two-column CSV.
pub fn save_curve_csv(path: &Path, curve: &CurveSeries) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y")?;
    for (x, y) in &curve.points {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}
