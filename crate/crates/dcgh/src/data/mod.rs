//! Dataset representation: feature matrices, multi-hot label matrices,
//! label-cosine similarity, and query/retrieval/train splits.

pub(crate) mod io;
mod synthetic;

pub use io::{
    load_features, load_labels, load_split, read_labels_from, save_features, save_labels,
    save_split, write_labels_to,
};
pub use synthetic::{anchor_directions, generate_synthetic, SyntheticConfig, SyntheticData};

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, TAG_SPLIT};
use rand::seq::SliceRandom;

/// Row-major matrix of real-valued modality features. Values are stored as
/// `f32`, matching the on-disk format; numerical code upcasts to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    /// Build a matrix from row-major values, validating shape and finiteness.
    pub fn from_values(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::dim("feature matrix shape", 1, rows.min(dim)));
        }
        if values.len() != rows * dim {
            return Err(Error::dim("feature payload length", rows * dim, values.len()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "features".to_string(),
                    row: i / dim,
                    col: i % dim,
                });
            }
        }
        Ok(Self { rows, dim, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Copy out the given rows, in order.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            dim: self.dim,
            values,
        }
    }
}

/// N×C multi-hot annotations. Every row carries at least one positive label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    rows: usize,
    categories: usize,
    bits: Vec<u8>,
}

impl LabelMatrix {
    /// Build from row-major {0,1} entries, enforcing the no-empty-row rule.
    pub fn from_values(rows: usize, categories: usize, bits: Vec<u8>) -> Result<Self> {
        if rows == 0 || categories == 0 {
            return Err(Error::dim("label matrix shape", 1, rows.min(categories)));
        }
        if bits.len() != rows * categories {
            return Err(Error::dim("label payload length", rows * categories, bits.len()));
        }
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::LabelDomain {
                    row: i / categories,
                    col: i % categories,
                    value: b,
                });
            }
        }
        for r in 0..rows {
            if bits[r * categories..(r + 1) * categories].iter().all(|&b| b == 0) {
                return Err(Error::EmptyLabelRow { row: r });
            }
        }
        Ok(Self {
            rows,
            categories,
            bits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.categories..(i + 1) * self.categories]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of positive categories in row `i`.
    pub fn row_weight(&self, i: usize) -> usize {
        self.row(i).iter().map(|&b| b as usize).sum()
    }

    /// Number of categories shared by two label rows.
    pub fn shared_with(&self, i: usize, other: &LabelMatrix, j: usize) -> usize {
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(&a, &b)| (a & b) as usize)
            .sum()
    }

    /// Copy out the given rows, in order.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * self.categories);
        for &i in indices {
            bits.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            categories: self.categories,
            bits,
        }
    }
}

/// Symmetric N×N label-cosine similarities in [0, 1] with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity between two multi-hot rows.
///
/// Computed as `shared / sqrt(w_i * w_j)` over integer counts, which makes the
/// diagonal exactly 1 and disjoint supports exactly 0.
pub fn label_cosine(a: &[u8], b: &[u8]) -> f64 {
    let shared: usize = a.iter().zip(b).map(|(&x, &y)| (x & y) as usize).sum();
    if shared == 0 {
        return 0.0;
    }
    let wa: usize = a.iter().map(|&x| x as usize).sum();
    let wb: usize = b.iter().map(|&x| x as usize).sum();
    shared as f64 / ((wa * wb) as f64).sqrt()
}

/// Full pairwise label-cosine similarity matrix.
pub fn label_similarity(labels: &LabelMatrix) -> SimilarityMatrix {
    let n = labels.rows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = label_cosine(labels.row(i), labels.row(j));
        }
    }
    SimilarityMatrix { n, values }
}

/// Pairwise label-cosine block for a batch, row-major n×n.
pub fn similarity_block(labels: &LabelMatrix) -> Vec<f64> {
    label_similarity(labels).values
}

/// Query/retrieval/train index sets over a paired dataset. Query and
/// retrieval are disjoint; the train set is drawn from the retrieval side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub query: Vec<usize>,
    pub retrieval: Vec<usize>,
}

impl DatasetSplit {
    /// Validate index bounds, query/retrieval disjointness, and train ⊆ retrieval.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check_bounds = |name: &str, v: &[usize]| -> Result<()> {
            for &i in v {
                if i >= n {
                    return Err(Error::InvalidSplit(format!(
                        "{name} index {i} out of bounds for {n} rows"
                    )));
                }
            }
            Ok(())
        };
        check_bounds("train", &self.train)?;
        check_bounds("query", &self.query)?;
        check_bounds("retrieval", &self.retrieval)?;
        let retrieval: std::collections::HashSet<usize> = self.retrieval.iter().copied().collect();
        for &q in &self.query {
            if retrieval.contains(&q) {
                return Err(Error::InvalidSplit(format!(
                    "index {q} appears in both query and retrieval"
                )));
            }
        }
        for &t in &self.train {
            if !retrieval.contains(&t) {
                return Err(Error::InvalidSplit(format!(
                    "train index {t} is not in the retrieval set"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministically split `n` paired samples into query/retrieval sets and
/// draw a training subset from the retrieval side.
pub fn make_split(n: usize, n_query: usize, n_train: usize, seed: u64) -> Result<DatasetSplit> {
    if n_query + 1 > n {
        return Err(Error::InvalidSplit(format!(
            "n_query={n_query} leaves no retrieval items out of n={n}"
        )));
    }
    if n_train > n - n_query {
        return Err(Error::InvalidSplit(format!(
            "n_train={n_train} exceeds retrieval size {}",
            n - n_query
        )));
    }
    let mut rng = seeded_rng(seed, TAG_SPLIT, 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut query: Vec<usize> = order[..n_query].to_vec();
    let mut retrieval: Vec<usize> = order[n_query..].to_vec();
    let mut pool = retrieval.clone();
    pool.shuffle(&mut rng);
    let mut train: Vec<usize> = pool[..n_train].to_vec();

    query.sort_unstable();
    retrieval.sort_unstable();
    train.sort_unstable();
    Ok(DatasetSplit {
        train,
        query,
        retrieval,
    })
}
