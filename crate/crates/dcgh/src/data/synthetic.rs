//! Seeded synthetic multi-label data for experiments and acceptance tests.
//!
//! Each class gets an orthonormal anchor direction in feature space. Samples
//! are an anchor (or the mean of two anchors for multi-label rows) plus
//! Gaussian noise; the two modality matrices use independent noise around the
//! same anchors, so cross-modal structure is present by construction.

use super::{FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, TAG_SYNTH};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    /// Fraction of samples carrying two labels.
    pub multi_label_rate: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_per_class: 40,
            classes: 3,
            dim: 32,
            multi_label_rate: 0.3,
            noise_sigma: 0.25,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.dim < self.classes {
            return Err(Error::InvalidConfig(format!(
                "dim {} must be at least the class count {}",
                self.dim, self.classes
            )));
        }
        if self.n_per_class == 0 {
            return Err(Error::InvalidConfig("n_per_class must be >= 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.multi_label_rate) {
            return Err(Error::InvalidConfig(format!(
                "multi_label_rate {} outside [0, 1]",
                self.multi_label_rate
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features_x: FeatureMatrix,
    pub features_y: FeatureMatrix,
    pub labels: LabelMatrix,
}

/// Orthonormal anchor directions, one per class (requires `dim >= classes`).
pub fn anchor_directions(classes: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, TAG_SYNTH, 0);
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(classes);
    while anchors.len() < classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // Gram-Schmidt against accepted anchors.
        for a in &anchors {
            let proj: f64 = v.iter().zip(a).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(a) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // degenerate draw, retry
        }
        for x in &mut v {
            *x /= norm;
        }
        anchors.push(v);
    }
    anchors
}

/// Generate paired two-modality features and multi-hot labels.
///
/// Exactly `round(multi_label_rate * N)` rows carry two labels; the mean of
/// the two class anchors is used as their base point. Deterministic for a
/// fixed config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let c = cfg.classes;
    let d = cfg.dim;
    let n = cfg.n_per_class * c;
    let anchors = anchor_directions(c, d, cfg.seed);

    // Per-class quota of two-label rows, summing to round(rate * N).
    let total_multi = (cfg.multi_label_rate * n as f64).round() as usize;
    let base = total_multi / c;
    let rem = total_multi % c;
    let quota: Vec<usize> = (0..c).map(|k| base + usize::from(k < rem)).collect();

    let mut rng = seeded_rng(cfg.seed, TAG_SYNTH, 1);
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    let mut bits = vec![0u8; n * c];

    let mut row = 0;
    for class in 0..c {
        for i in 0..cfg.n_per_class {
            let second = if i < quota[class] {
                let mut other = rng.gen_range(0..c - 1);
                if other >= class {
                    other += 1;
                }
                Some(other)
            } else {
                None
            };
            bits[row * c + class] = 1;
            let mut center = anchors[class].clone();
            if let Some(other) = second {
                bits[row * c + other] = 1;
                for (ck, ak) in center.iter_mut().zip(&anchors[other]) {
                    *ck = 0.5 * (*ck + ak);
                }
            }
            for &ck in &center {
                let noise: f64 = rng.sample(StandardNormal);
                xs.push((ck + cfg.noise_sigma * noise) as f32);
            }
            for &ck in &center {
                let noise: f64 = rng.sample(StandardNormal);
                ys.push((ck + cfg.noise_sigma * noise) as f32);
            }
            row += 1;
        }
    }

    Ok(SyntheticData {
        features_x: FeatureMatrix::from_values(n, d, xs)?,
        features_y: FeatureMatrix::from_values(n, d, ys)?,
        labels: LabelMatrix::from_values(n, c, bits)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_are_orthonormal() {
        let anchors = anchor_directions(4, 16, 3);
        for (i, a) in anchors.iter().enumerate() {
            let norm: f64 = a.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-10);
            for b in anchors.iter().skip(i + 1) {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                assert!(dot.abs() <= 0.1, "pairwise dot {dot}");
            }
        }
    }

    #[test]
    fn single_label_rate_zero() {
        let cfg = SyntheticConfig {
            n_per_class: 10,
            classes: 3,
            dim: 8,
            multi_label_rate: 0.0,
            noise_sigma: 0.1,
            seed: 1,
        };
        let data = generate_synthetic(&cfg).unwrap();
        assert_eq!(data.labels.rows(), 30);
        for i in 0..30 {
            assert_eq!(data.labels.row_weight(i), 1);
        }
    }

    #[test]
    fn half_rate_gives_exact_two_label_count() {
        let cfg = SyntheticConfig {
            n_per_class: 10,
            classes: 3,
            dim: 8,
            multi_label_rate: 0.5,
            noise_sigma: 0.1,
            seed: 1,
        };
        let data = generate_synthetic(&cfg).unwrap();
        let twos = (0..30).filter(|&i| data.labels.row_weight(i) == 2).count();
        assert_eq!(twos, 15);
    }

    #[test]
    fn zero_noise_collapses_single_label_classes() {
        let cfg = SyntheticConfig {
            n_per_class: 5,
            classes: 2,
            dim: 4,
            multi_label_rate: 0.0,
            noise_sigma: 0.0,
            seed: 9,
        };
        let data = generate_synthetic(&cfg).unwrap();
        for i in 1..5 {
            assert_eq!(data.features_x.row(0), data.features_x.row(i));
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.features_x, b.features_x);
        assert_eq!(a.features_y, b.features_y);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut cfg = SyntheticConfig {
            classes: 1,
            ..SyntheticConfig::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
        cfg.classes = 3;
        cfg.dim = 2;
        assert!(generate_synthetic(&cfg).is_err());
        cfg.dim = 8;
        cfg.multi_label_rate = 1.5;
        assert!(generate_synthetic(&cfg).is_err());
    }
}
