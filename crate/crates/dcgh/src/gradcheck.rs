//! Central finite-difference verification of the analytic gradients.
//!
//! Random instances are regenerated until no hinge sits within a small
//! margin of its kink (the subgradient there is a fixed convention, so a
//! finite difference straddling the kink would disagree by design).
//! Diagonal code pairs are exempt: their cosine is pinned at ~1 by the norm
//! guard and moves by O(eps) per step, so the hinge is never crossed.

use crate::data::{similarity_block, LabelMatrix};
use crate::error::Result;
use crate::losses::{
    cosine, objective_with_gradients, pairwise_loss, proxy_loss, total_loss, variance_loss,
    LossWeights, TermSelection,
};
use crate::model::{BinaryLikeCodes, ProxyBank};
use crate::rng::seeded_rng;
use rand::Rng;
use std::fmt;

const TAG_GRADCHECK: u64 = 7;
const KINK_MARGIN: f64 = 5e-4;
const MIN_VECTOR_NORM: f64 = 0.5;

/// One loss family under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Proxy,
    Pairwise,
    Variance,
    Total,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Proxy,
        Family::Pairwise,
        Family::Variance,
        Family::Total,
    ];

    fn selection(&self) -> TermSelection {
        match self {
            Family::Proxy => TermSelection {
                proxy: true,
                pairwise: false,
                variance: false,
            },
            Family::Pairwise => TermSelection {
                proxy: false,
                pairwise: true,
                variance: false,
            },
            Family::Variance => TermSelection {
                proxy: false,
                pairwise: false,
                variance: true,
            },
            Family::Total => TermSelection::ALL,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Proxy => write!(f, "proxy"),
            Family::Pairwise => write!(f, "pairwise"),
            Family::Variance => write!(f, "variance"),
            Family::Total => write!(f, "total"),
        }
    }
}

/// Which flattened tensor a coordinate lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    CodesX,
    CodesY,
    Proxies,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::CodesX => write!(f, "codes_x"),
            Block::CodesY => write!(f, "codes_y"),
            Block::Proxies => write!(f, "proxies"),
        }
    }
}

/// Worst coordinate seen for one family.
#[derive(Debug, Clone, Copy)]
pub struct WorstCoordinate {
    pub instance: usize,
    pub block: Block,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub family: Family,
    pub max_rel_error: f64,
    pub worst: Option<WorstCoordinate>,
}

impl FamilyResult {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Instance shape to draw.
#[derive(Debug, Clone, Copy)]
pub struct InstanceSize {
    pub batch: usize,
    pub categories: usize,
    pub code_length: usize,
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub instances: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub sizes: Vec<InstanceSize>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            step: 1e-5,
            tolerance: 1e-4,
            seed: 0,
            weights: LossWeights::default(),
            sizes: vec![
                InstanceSize {
                    batch: 4,
                    categories: 3,
                    code_length: 8,
                },
                InstanceSize {
                    batch: 8,
                    categories: 5,
                    code_length: 16,
                },
                InstanceSize {
                    batch: 6,
                    categories: 4,
                    code_length: 32,
                },
                InstanceSize {
                    batch: 1,
                    categories: 1,
                    code_length: 8,
                },
            ],
        }
    }
}

/// Deliberate gradient perturbation, used to prove the check can fail.
#[derive(Debug, Clone, Copy)]
pub struct Fault {
    pub family: Family,
    pub block: Block,
    pub index: usize,
    pub delta: f64,
}

struct Instance {
    codes_x: BinaryLikeCodes,
    codes_y: BinaryLikeCodes,
    proxies: ProxyBank,
    labels: LabelMatrix,
    s_block: Vec<f64>,
}

fn vector_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn draw_instance(size: InstanceSize, seed: u64, attempt: u64) -> Instance {
    let mut rng = seeded_rng(seed, TAG_GRADCHECK, attempt);
    let n = size.batch;
    let c = size.categories;
    let k = size.code_length;
    let mut bits = vec![0u8; n * c];
    for row in 0..n {
        for col in 0..c {
            bits[row * c + col] = u8::from(rng.gen_bool(0.4));
        }
        if bits[row * c..(row + 1) * c].iter().all(|&b| b == 0) {
            bits[row * c + rng.gen_range(0..c)] = 1;
        }
    }
    let labels = LabelMatrix::from_values(n, c, bits).expect("generated labels are valid");
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-0.9..0.9)).collect()
    };
    let codes_x = BinaryLikeCodes::from_values(n, k, draw(&mut rng, n * k)).unwrap();
    let codes_y = BinaryLikeCodes::from_values(n, k, draw(&mut rng, n * k)).unwrap();
    let proxies = ProxyBank::from_values(c, k, draw(&mut rng, c * k)).unwrap();
    let s_block = similarity_block(&labels);
    Instance {
        codes_x,
        codes_y,
        proxies,
        labels,
        s_block,
    }
}

/// Reject instances whose hinges sit within the kink margin, or whose
/// vectors are too short for stable cosines.
fn is_clean(inst: &Instance) -> bool {
    let n = inst.labels.rows();
    let c = inst.labels.categories();
    for codes in [&inst.codes_x, &inst.codes_y] {
        for i in 0..n {
            if vector_norm(codes.row(i)) < MIN_VECTOR_NORM {
                return false;
            }
        }
    }
    for j in 0..c {
        if vector_norm(inst.proxies.proxy(j)) < MIN_VECTOR_NORM {
            return false;
        }
    }
    for codes in [&inst.codes_x, &inst.codes_y] {
        // irrelevant (code, proxy) pairs: clamp at cosine 0
        for i in 0..n {
            for j in 0..c {
                if inst.labels.row(i)[j] == 0
                    && cosine(codes.row(i), inst.proxies.proxy(j)).abs() < KINK_MARGIN
                {
                    return false;
                }
            }
        }
        // ordered code pairs: hinge at s - c = 0 (relevant) or c = 0 (irrelevant)
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let s = inst.s_block[i * n + j];
                let cos = cosine(codes.row(i), codes.row(j));
                if s > 0.0 {
                    if (s - cos).abs() < KINK_MARGIN {
                        return false;
                    }
                } else if cos.abs() < KINK_MARGIN {
                    return false;
                }
            }
        }
    }
    true
}

fn family_value(family: Family, inst: &Instance, weights: &LossWeights) -> f64 {
    match family {
        Family::Proxy => proxy_loss(&inst.codes_x, &inst.codes_y, &inst.proxies, &inst.labels)
            .expect("shapes are consistent"),
        Family::Pairwise => {
            pairwise_loss(&inst.codes_x, &inst.codes_y, &inst.s_block, weights)
                .expect("shapes are consistent")
                .weighted
        }
        Family::Variance => {
            variance_loss(&inst.codes_x, &inst.codes_y, &inst.proxies, &inst.labels)
                .expect("shapes are consistent")
        }
        Family::Total => total_loss(
            &inst.codes_x,
            &inst.codes_y,
            &inst.proxies,
            &inst.labels,
            &inst.s_block,
            weights,
        )
        .expect("shapes are consistent")
        .total,
    }
}

fn with_perturbed(inst: &Instance, block: Block, index: usize, delta: f64) -> Instance {
    let mut codes_x = inst.codes_x.values().to_vec();
    let mut codes_y = inst.codes_y.values().to_vec();
    let mut proxies = inst.proxies.values().to_vec();
    match block {
        Block::CodesX => codes_x[index] += delta,
        Block::CodesY => codes_y[index] += delta,
        Block::Proxies => proxies[index] += delta,
    }
    let n = inst.codes_x.rows();
    let k = inst.codes_x.code_length();
    let c = inst.proxies.categories();
    Instance {
        codes_x: BinaryLikeCodes::from_values(n, k, codes_x).unwrap(),
        codes_y: BinaryLikeCodes::from_values(n, k, codes_y).unwrap(),
        proxies: ProxyBank::from_values(c, k, proxies).unwrap(),
        labels: inst.labels.clone(),
        s_block: inst.s_block.clone(),
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Run the finite-difference suite; `fault`, when set, perturbs one analytic
/// gradient coordinate so tests can confirm the check trips.
pub fn run_with_fault(cfg: &CheckConfig, fault: Option<&Fault>) -> Result<Vec<FamilyResult>> {
    let mut results: Vec<FamilyResult> = Family::ALL
        .iter()
        .map(|&family| FamilyResult {
            family,
            max_rel_error: 0.0,
            worst: None,
        })
        .collect();

    let mut attempt = 0u64;
    for instance_idx in 0..cfg.instances {
        let size = cfg.sizes[instance_idx % cfg.sizes.len()];
        let inst = loop {
            let candidate = draw_instance(size, cfg.seed, attempt);
            attempt += 1;
            if is_clean(&candidate) || attempt.is_multiple_of(1000) {
                break candidate;
            }
        };

        for result in results.iter_mut() {
            let family = result.family;
            let (_, mut grads) = objective_with_gradients(
                &inst.codes_x,
                &inst.codes_y,
                &inst.proxies,
                &inst.labels,
                &inst.s_block,
                &cfg.weights,
                family.selection(),
            )?;
            if let Some(f) = fault {
                if f.family == family {
                    let target = match f.block {
                        Block::CodesX => &mut grads.d_codes_x,
                        Block::CodesY => &mut grads.d_codes_y,
                        Block::Proxies => &mut grads.d_proxies,
                    };
                    if f.index < target.len() {
                        target[f.index] += f.delta;
                    }
                }
            }

            let blocks: [(Block, &[f64]); 3] = [
                (Block::CodesX, &grads.d_codes_x),
                (Block::CodesY, &grads.d_codes_y),
                (Block::Proxies, &grads.d_proxies),
            ];
            for (block, analytic) in blocks {
                for (index, &a) in analytic.iter().enumerate() {
                    let up = family_value(
                        family,
                        &with_perturbed(&inst, block, index, cfg.step),
                        &cfg.weights,
                    );
                    let down = family_value(
                        family,
                        &with_perturbed(&inst, block, index, -cfg.step),
                        &cfg.weights,
                    );
                    let numeric = (up - down) / (2.0 * cfg.step);
                    let err = relative_error(a, numeric);
                    if err > result.max_rel_error {
                        result.max_rel_error = err;
                        result.worst = Some(WorstCoordinate {
                            instance: instance_idx,
                            block,
                            index,
                            analytic: a,
                            numeric,
                        });
                    }
                }
            }
        }
    }
    Ok(results)
}

/// Run the finite-difference suite with the configured sizes and seed.
pub fn run(cfg: &CheckConfig) -> Result<Vec<FamilyResult>> {
    run_with_fault(cfg, None)
}

/// True when every family is within tolerance.
pub fn all_passed(results: &[FamilyResult], tolerance: f64) -> bool {
    results.iter().all(|r| r.passed(tolerance))
}
