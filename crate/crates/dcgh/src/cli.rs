//! Command-line pipeline: synth, train, encode, eval, gradcheck, ablate.
//!
//! Every command is driven by (config file, flags, seed) and writes its
//! artifacts into a caller-chosen location, so full runs are reproducible
//! byte for byte. Config files are `key = value` lines; unknown keys are
//! rejected. `synth` and `train` also drop a JSON manifest capturing the
//! config snapshot, input digests, and artifact paths.

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::data::{
    generate_synthetic, load_features, load_labels, load_split, make_split, save_features,
    save_labels, save_split, DatasetSplit, FeatureMatrix, LabelMatrix, SyntheticConfig,
};
use crate::encoder::{encode_dataset, load_codes, save_codes};
use crate::error::{Error, Result};
use crate::eval::{evaluate, save_curve_csv, Direction, MetricReport, RetrievalTask};
use crate::gradcheck::{self, CheckConfig, InstanceSize};
use crate::trainer::{train, TrainConfig, Variant};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const FEATURES_X_FILE: &str = "features_x.bin";
pub const FEATURES_Y_FILE: &str = "features_y.bin";
pub const LABELS_FILE: &str = "labels.bin";
pub const SPLIT_FILE: &str = "split.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Parser, Debug)]
#[command(name = "dcgh", version, about = "Multi-label cross-modal hashing pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded synthetic two-modality dataset plus a split file.
    Synth {
        /// Config file (key = value); keys: n_per_class, classes, dim,
        /// multi_label_rate, noise_sigma, seed, n_query, n_train
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train hash heads and proxies on a synth-format data directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config file; keys: bits, epochs, batch_size, learning_rate,
        /// alpha, beta, seed, variant, adam_beta1, adam_beta2, adam_eps
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Code length K; overrides the config.
        #[arg(long)]
        bits: Option<usize>,
        /// Objective variant: full|pv|xv|v; overrides the config.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Encode features into packed ±1 codes with a trained checkpoint.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Which head to apply: img|txt
        #[arg(long)]
        modality: String,
        /// Optional split file for row selection.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Row subset from the split: all|query|retrieval|train
        #[arg(long, default_value = "all")]
        subset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate retrieval metrics of query codes against database codes.
    Eval {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Img2Txt or Txt2Img (report tag only)
        #[arg(long)]
        direction: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify analytic loss gradients against central finite differences.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        /// Instance shapes as NxCxK (repeatable), e.g. --sizes 8x5x16
        #[arg(long)]
        sizes: Vec<String>,
    },
    /// Train and evaluate every objective variant, tabulating mAP.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bits: Option<usize>,
    },
}

/// Flat `key = value` config file with strict key checking.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    map: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key {key:?}")));
            }
        }
        Ok(Self { map })
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "unknown key {key:?}; allowed: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    fn parse_with<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidConfig(format!("key {key:?}: cannot parse value {raw:?}"))
            }),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        self.parse_with(key, default)
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        self.parse_with(key, default)
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        self.parse_with(key, default)
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.map
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.map.clone()
    }
}

/// Reproducibility record written next to generated artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub created_unix: u64,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: "dcgh",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config,
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("manifest serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }
}

/// SHA-256 digest of a file, lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

const SYNTH_KEYS: &[&str] = &[
    "n_per_class",
    "classes",
    "dim",
    "multi_label_rate",
    "noise_sigma",
    "seed",
    "n_query",
    "n_train",
];

/// Synthetic-dataset parameters: generator config plus split sizes.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub synth: SyntheticConfig,
    pub n_query: usize,
    /// 0 means "train on the whole retrieval side".
    pub n_train: usize,
}

impl SynthParams {
    pub fn from_config(cfg: &KvConfig, seed_override: Option<u64>) -> Result<Self> {
        cfg.check_keys(SYNTH_KEYS)?;
        let defaults = SyntheticConfig::default();
        let mut synth = SyntheticConfig {
            n_per_class: cfg.get_usize("n_per_class", defaults.n_per_class)?,
            classes: cfg.get_usize("classes", defaults.classes)?,
            dim: cfg.get_usize("dim", defaults.dim)?,
            multi_label_rate: cfg.get_f64("multi_label_rate", defaults.multi_label_rate)?,
            noise_sigma: cfg.get_f64("noise_sigma", defaults.noise_sigma)?,
            seed: cfg.get_u64("seed", defaults.seed)?,
        };
        if let Some(seed) = seed_override {
            synth.seed = seed;
        }
        Ok(Self {
            synth,
            n_query: cfg.get_usize("n_query", 20)?,
            n_train: cfg.get_usize("n_train", 0)?,
        })
    }

    fn snapshot(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("n_per_class".into(), self.synth.n_per_class.to_string());
        map.insert("classes".into(), self.synth.classes.to_string());
        map.insert("dim".into(), self.synth.dim.to_string());
        map.insert(
            "multi_label_rate".into(),
            self.synth.multi_label_rate.to_string(),
        );
        map.insert("noise_sigma".into(), self.synth.noise_sigma.to_string());
        map.insert("seed".into(), self.synth.seed.to_string());
        map.insert("n_query".into(), self.n_query.to_string());
        map.insert("n_train".into(), self.n_train.to_string());
        map
    }
}

/// Generate the dataset, write the four data files and the manifest.
pub fn cmd_synth(params: &SynthParams, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let data = generate_synthetic(&params.synth)?;
    let n = data.labels.rows();
    let n_train = if params.n_train == 0 {
        n - params.n_query
    } else {
        params.n_train
    };
    let split = make_split(n, params.n_query, n_train, params.synth.seed)?;

    save_features(&out_dir.join(FEATURES_X_FILE), &data.features_x)?;
    save_features(&out_dir.join(FEATURES_Y_FILE), &data.features_y)?;
    save_labels(&out_dir.join(LABELS_FILE), &data.labels)?;
    save_split(&out_dir.join(SPLIT_FILE), &split)?;

    let mut manifest = RunManifest::new("synth", params.synth.seed, params.snapshot());
    manifest.artifacts = vec![
        FEATURES_X_FILE.to_string(),
        FEATURES_Y_FILE.to_string(),
        LABELS_FILE.to_string(),
        SPLIT_FILE.to_string(),
    ];
    for name in &manifest.artifacts.clone() {
        manifest.add_input(&out_dir.join(name))?;
    }
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "bits",
    "epochs",
    "batch_size",
    "learning_rate",
    "alpha",
    "beta",
    "seed",
    "variant",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
];

/// Build a TrainConfig from a config file plus CLI overrides.
pub fn train_config_from(
    cfg: &KvConfig,
    seed: Option<u64>,
    bits: Option<usize>,
    variant: Option<&str>,
    epochs: Option<usize>,
) -> Result<TrainConfig> {
    cfg.check_keys(TRAIN_KEYS)?;
    let d = TrainConfig::default();
    let mut out = TrainConfig {
        code_length: cfg.get_usize("bits", d.code_length)?,
        epochs: cfg.get_usize("epochs", d.epochs)?,
        batch_size: cfg.get_usize("batch_size", d.batch_size)?,
        learning_rate: cfg.get_f64("learning_rate", d.learning_rate)?,
        alpha: cfg.get_f64("alpha", d.alpha)?,
        beta: cfg.get_f64("beta", d.beta)?,
        seed: cfg.get_u64("seed", d.seed)?,
        variant: Variant::parse(&cfg.get_str("variant", "full"))?,
        adam_beta1: cfg.get_f64("adam_beta1", d.adam_beta1)?,
        adam_beta2: cfg.get_f64("adam_beta2", d.adam_beta2)?,
        adam_eps: cfg.get_f64("adam_eps", d.adam_eps)?,
    };
    if let Some(seed) = seed {
        out.seed = seed;
    }
    if let Some(bits) = bits {
        out.code_length = bits;
    }
    if let Some(v) = variant {
        out.variant = Variant::parse(v)?;
    }
    if let Some(e) = epochs {
        out.epochs = e;
    }
    out.validate()?;
    Ok(out)
}

fn train_snapshot(cfg: &TrainConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("bits".into(), cfg.code_length.to_string());
    map.insert("epochs".into(), cfg.epochs.to_string());
    map.insert("batch_size".into(), cfg.batch_size.to_string());
    map.insert("learning_rate".into(), cfg.learning_rate.to_string());
    map.insert("alpha".into(), cfg.alpha.to_string());
    map.insert("beta".into(), cfg.beta.to_string());
    map.insert("seed".into(), cfg.seed.to_string());
    map.insert("variant".into(), cfg.variant.name().to_string());
    map.insert("adam_beta1".into(), cfg.adam_beta1.to_string());
    map.insert("adam_beta2".into(), cfg.adam_beta2.to_string());
    map.insert("adam_eps".into(), cfg.adam_eps.to_string());
    map
}

/// Load a synth-format data directory.
pub fn load_data_dir(dir: &Path) -> Result<(FeatureMatrix, FeatureMatrix, LabelMatrix, DatasetSplit)> {
    let x = load_features(&dir.join(FEATURES_X_FILE))?;
    let y = load_features(&dir.join(FEATURES_Y_FILE))?;
    let labels = load_labels(&dir.join(LABELS_FILE))?;
    let split = load_split(&dir.join(SPLIT_FILE))?;
    split.validate(labels.rows())?;
    Ok((x, y, labels, split))
}

/// Train on the split's train rows; write manifest, checkpoint, and log.
pub fn cmd_train(cfg: &TrainConfig, data_dir: &Path, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let (x, y, labels, split) = load_data_dir(data_dir)?;

    let mut manifest = RunManifest::new("train", cfg.seed, train_snapshot(cfg));
    for name in [FEATURES_X_FILE, FEATURES_Y_FILE, LABELS_FILE, SPLIT_FILE] {
        manifest.add_input(&data_dir.join(name))?;
    }
    manifest.artifacts = vec![CHECKPOINT_FILE.to_string(), TRAIN_LOG_FILE.to_string()];
    manifest.save(&out_dir.join(MANIFEST_FILE))?;

    let xt = x.gather(&split.train);
    let yt = y.gather(&split.train);
    let lt = labels.gather(&split.train);
    let outcome = train(cfg, &xt, &yt, &lt)?;

    save_checkpoint(
        &out_dir.join(CHECKPOINT_FILE),
        &Checkpoint::new(
            outcome.head_x,
            outcome.head_y,
            outcome.proxies,
            outcome.adam,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
        ),
    )?;
    fs::write(out_dir.join(TRAIN_LOG_FILE), outcome.report.to_csv())?;
    Ok(())
}

/// Row subset selector for `encode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    Query,
    Retrieval,
    Train,
}

impl Subset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Subset::All),
            "query" => Ok(Subset::Query),
            "retrieval" => Ok(Subset::Retrieval),
            "train" => Ok(Subset::Train),
            other => Err(Error::InvalidConfig(format!(
                "unknown subset {other:?}; expected all|query|retrieval|train"
            ))),
        }
    }
}

/// Which head encodes the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Img,
    Txt,
}

impl Modality {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "img" | "x" => Ok(Modality::Img),
            "txt" | "y" => Ok(Modality::Txt),
            other => Err(Error::InvalidConfig(format!(
                "unknown modality {other:?}; expected img|txt"
            ))),
        }
    }
}

/// Encode (a subset of) a feature file into a code file.
pub fn cmd_encode(
    checkpoint_path: &Path,
    features_path: &Path,
    labels_path: &Path,
    modality: Modality,
    split: Option<(&Path, Subset)>,
    out: &Path,
) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint_path)?;
    let features = load_features(features_path)?;
    let labels = load_labels(labels_path)?;
    if labels.rows() != features.rows() {
        return Err(Error::dim("label rows", features.rows(), labels.rows()));
    }
    let (features, labels) = match split {
        None | Some((_, Subset::All)) => (features, labels),
        Some((split_path, subset)) => {
            let s = load_split(split_path)?;
            s.validate(labels.rows())?;
            let idx = match subset {
                Subset::Query => &s.query,
                Subset::Retrieval => &s.retrieval,
                Subset::Train => &s.train,
                Subset::All => unreachable!(),
            };
            (features.gather(idx), labels.gather(idx))
        }
    };
    let head = match modality {
        Modality::Img => &ckpt.head_x,
        Modality::Txt => &ckpt.head_y,
    };
    let codes = encode_dataset(head, &features)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_codes(out, &codes, &labels)?;
    Ok(())
}

/// Evaluate query codes against database codes; write report and curves.
pub fn cmd_eval(
    query_path: &Path,
    db_path: &Path,
    direction: Direction,
    out_dir: &Path,
) -> Result<MetricReport> {
    fs::create_dir_all(out_dir)?;
    let (queries, query_labels) = load_codes(query_path)?;
    let (db, db_labels) = load_codes(db_path)?;
    let task = RetrievalTask::new(queries, query_labels, db, db_labels, direction)?;
    let report = evaluate(&task)?;
    fs::write(out_dir.join(REPORT_FILE), report.to_json())?;
    save_curve_csv(&out_dir.join("pr_curve.csv"), &report.pr_curve)?;
    save_curve_csv(&out_dir.join("topn_precision.csv"), &report.topn_curve)?;
    Ok(report)
}

fn parse_size(spec: &str) -> Result<InstanceSize> {
    let parts: Vec<&str> = spec.split('x').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "size {spec:?} must be NxCxK, e.g. 8x5x16"
        )));
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::InvalidConfig(format!("bad size component {s:?}")))
    };
    Ok(InstanceSize {
        batch: parse(parts[0])?,
        categories: parse(parts[1])?,
        code_length: parse(parts[2])?,
    })
}

/// Run the finite-difference suite and print one line per loss family.
/// Returns true when every family is within tolerance.
pub fn cmd_gradcheck(
    seed: Option<u64>,
    instances: Option<usize>,
    sizes: &[String],
) -> Result<bool> {
    let mut cfg = CheckConfig::default();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = instances {
        cfg.instances = n;
    }
    if !sizes.is_empty() {
        cfg.sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<_>>()?;
    }
    let results = gradcheck::run(&cfg)?;
    let mut ok = true;
    for r in &results {
        let status = if r.passed(cfg.tolerance) { "PASS" } else { "FAIL" };
        match &r.worst {
            Some(w) if !r.passed(cfg.tolerance) => println!(
                "{}: max_rel_err={:.3e} {} (instance {}, {}[{}], analytic {:.6e}, numeric {:.6e})",
                r.family, r.max_rel_error, status, w.instance, w.block, w.index, w.analytic, w.numeric
            ),
            _ => println!("{}: max_rel_err={:.3e} {}", r.family, r.max_rel_error, status),
        }
        ok &= r.passed(cfg.tolerance);
    }
    Ok(ok)
}

/// Per-variant mAP pair from an ablation run.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub map_img2txt: f64,
    pub map_txt2img: f64,
}

/// Train, encode, and evaluate one variant fully in memory.
pub fn run_variant_pipeline(
    cfg: &TrainConfig,
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    labels: &LabelMatrix,
    split: &DatasetSplit,
) -> Result<(f64, f64)> {
    let outcome = train(
        cfg,
        &x.gather(&split.train),
        &y.gather(&split.train),
        &labels.gather(&split.train),
    )?;
    let query_labels = labels.gather(&split.query);
    let db_labels = labels.gather(&split.retrieval);
    let qx = encode_dataset(&outcome.head_x, &x.gather(&split.query))?;
    let qy = encode_dataset(&outcome.head_y, &y.gather(&split.query))?;
    let dbx = encode_dataset(&outcome.head_x, &x.gather(&split.retrieval))?;
    let dby = encode_dataset(&outcome.head_y, &y.gather(&split.retrieval))?;

    let i2t = RetrievalTask::new(
        qx,
        query_labels.clone(),
        dby,
        db_labels.clone(),
        Direction::Img2Txt,
    )?;
    let t2i = RetrievalTask::new(qy, query_labels, dbx, db_labels, Direction::Txt2Img)?;
    Ok((
        crate::eval::mean_average_precision(&i2t, None)?,
        crate::eval::mean_average_precision(&t2i, None)?,
    ))
}

/// Run all four variants and tabulate cross-modal mAP.
pub fn cmd_ablate(base: &TrainConfig, data_dir: &Path, out_dir: &Path) -> Result<Vec<AblationRow>> {
    fs::create_dir_all(out_dir)?;
    let (x, y, labels, split) = load_data_dir(data_dir)?;
    let mut rows = Vec::new();
    for variant in [
        Variant::Full,
        Variant::NoVariance,
        Variant::ProxyOnly,
        Variant::PairwiseOnly,
    ] {
        let cfg = TrainConfig { variant, ..base.clone() };
        let (i2t, t2i) = run_variant_pipeline(&cfg, &x, &y, &labels, &split)?;
        rows.push(AblationRow {
            variant: variant.name().to_string(),
            map_img2txt: i2t,
            map_txt2img: t2i,
        });
    }
    let mut csv = String::from("variant,map_img2txt,map_txt2img\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.variant, r.map_img2txt, r.map_txt2img));
    }
    fs::write(out_dir.join("ablation.csv"), csv)?;
    println!("{:<8} {:>12} {:>12}", "variant", "mAP i2t", "mAP t2i");
    for r in &rows {
        println!(
            "{:<8} {:>12.4} {:>12.4}",
            r.variant, r.map_img2txt, r.map_txt2img
        );
    }
    Ok(rows)
}

/// Dispatch a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth { config, out, seed } => {
            let kv = match config {
                Some(path) => KvConfig::load(&path)?,
                None => KvConfig::default(),
            };
            let params = SynthParams::from_config(&kv, seed)?;
            cmd_synth(&params, &out)?;
            Ok(0)
        }
        Command::Train {
            data,
            out,
            config,
            seed,
            bits,
            variant,
            epochs,
        } => {
            let kv = match config {
                Some(path) => KvConfig::load(&path)?,
                None => KvConfig::default(),
            };
            let cfg = train_config_from(&kv, seed, bits, variant.as_deref(), epochs)?;
            cmd_train(&cfg, &data, &out)?;
            Ok(0)
        }
        Command::Encode {
            checkpoint,
            features,
            labels,
            modality,
            split,
            subset,
            out,
        } => {
            let modality = Modality::parse(&modality)?;
            let subset = Subset::parse(&subset)?;
            let split_sel = split.as_deref().map(|p| (p, subset));
            if split_sel.is_none() && subset != Subset::All {
                return Err(Error::InvalidConfig(
                    "--subset requires --split".to_string(),
                ));
            }
            cmd_encode(&checkpoint, &features, &labels, modality, split_sel, &out)?;
            Ok(0)
        }
        Command::Eval {
            query,
            db,
            direction,
            out,
        } => {
            let direction = Direction::parse(&direction)?;
            cmd_eval(&query, &db, direction, &out)?;
            Ok(0)
        }
        Command::Gradcheck {
            seed,
            instances,
            sizes,
        } => {
            let ok = cmd_gradcheck(seed, instances, &sizes)?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Ablate {
            data,
            out,
            config,
            seed,
            bits,
        } => {
            let kv = match config {
                Some(path) => KvConfig::load(&path)?,
                None => KvConfig::default(),
            };
            let cfg = train_config_from(&kv, seed, bits, None, None)?;
            cmd_ablate(&cfg, &data, &out)?;
            Ok(0)
        }
    }
}
