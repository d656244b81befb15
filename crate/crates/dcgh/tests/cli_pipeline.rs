//! Command-level integration tests: the binary, config handling, the
//! pipeline wiring, and CLI/library parity.

mod common;

use dcgh::cli::{self, KvConfig, Modality, SynthParams, Subset};
use dcgh::eval::Direction;
use dcgh::trainer::{TrainConfig, Variant};
use std::path::Path;
use std::process::Command;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dcgh"))
}

fn write_synth(dir: &Path, seed: u64) {
    let mut kv = KvConfig::default();
    kv.set("n_per_class", "10".into());
    kv.set("dim", "12".into());
    kv.set("n_query", "6".into());
    let params = SynthParams::from_config(&kv, Some(seed)).unwrap();
    cli::cmd_synth(&params, dir).unwrap();
}

#[test]
fn synth_writes_loadable_files_and_is_seed_stable() {
    let tmp = tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    write_synth(&a, 5);
    write_synth(&b, 5);
    for name in [
        cli::FEATURES_X_FILE,
        cli::FEATURES_Y_FILE,
        cli::LABELS_FILE,
        cli::SPLIT_FILE,
    ] {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs across same-seed runs");
    }
    let (x, y, labels, split) = cli::load_data_dir(&a).unwrap();
    assert_eq!(x.rows(), 30);
    assert_eq!(y.rows(), 30);
    assert_eq!(labels.rows(), 30);
    assert_eq!(split.query.len(), 6);
    assert!(a.join(cli::MANIFEST_FILE).exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join(cli::MANIFEST_FILE)).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);
}

#[test]
fn synth_rejects_single_class_via_binary() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("synth.cfg");
    std::fs::write(&cfg, "classes = 1\n").unwrap();
    let out = bin()
        .args(["synth", "--out"])
        .arg(tmp.path().join("data"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("classes"), "stderr: {stderr}");
}

#[test]
fn train_one_epoch_logs_one_row_and_pv_zeroes_pair_columns() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 3);

    let one = TrainConfig {
        code_length: 8,
        epochs: 1,
        seed: 3,
        ..TrainConfig::default()
    };
    let out_dir = tmp.path().join("m1");
    cli::cmd_train(&one, &data, &out_dir).unwrap();
    let log = std::fs::read_to_string(out_dir.join(cli::TRAIN_LOG_FILE)).unwrap();
    let lines: Vec<&str> = log.trim().lines().collect();
    assert_eq!(lines[0], "epoch,step,proxy,pair_pos,pair_neg,variance,total");
    assert_eq!(lines.len(), 2, "one epoch over one batch logs one step row");

    let pv = TrainConfig {
        variant: Variant::ProxyOnly,
        epochs: 3,
        ..one
    };
    let out_dir = tmp.path().join("m2");
    cli::cmd_train(&pv, &data, &out_dir).unwrap();
    let log = std::fs::read_to_string(out_dir.join(cli::TRAIN_LOG_FILE)).unwrap();
    for line in log.trim().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "0", "pair_pos column must be zero under pv");
        assert_eq!(cols[4], "0", "pair_neg column must be zero under pv");
        assert_eq!(cols[5], "0", "variance column must be zero under pv");
    }
}

#[test]
fn train_is_checkpoint_digest_stable() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 11);
    let cfg = TrainConfig {
        code_length: 8,
        epochs: 5,
        seed: 11,
        ..TrainConfig::default()
    };
    let m1 = tmp.path().join("m1");
    let m2 = tmp.path().join("m2");
    cli::cmd_train(&cfg, &data, &m1).unwrap();
    cli::cmd_train(&cfg, &data, &m2).unwrap();
    assert_eq!(
        cli::sha256_file(&m1.join(cli::CHECKPOINT_FILE)).unwrap(),
        cli::sha256_file(&m2.join(cli::CHECKPOINT_FILE)).unwrap()
    );
}

#[test]
fn encode_is_digest_stable_and_checks_dimensions() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 7);
    let model = tmp.path().join("model");
    let cfg = TrainConfig {
        code_length: 8,
        epochs: 2,
        seed: 7,
        ..TrainConfig::default()
    };
    cli::cmd_train(&cfg, &data, &model).unwrap();

    let ckpt = model.join(cli::CHECKPOINT_FILE);
    let out1 = tmp.path().join("a.codes");
    let out2 = tmp.path().join("b.codes");
    for out in [&out1, &out2] {
        cli::cmd_encode(
            &ckpt,
            &data.join(cli::FEATURES_X_FILE),
            &data.join(cli::LABELS_FILE),
            Modality::Img,
            None,
            out,
        )
        .unwrap();
    }
    assert_eq!(
        cli::sha256_file(&out1).unwrap(),
        cli::sha256_file(&out2).unwrap()
    );
    let (codes, labels) = dcgh::encoder::load_codes(&out1).unwrap();
    assert_eq!(codes.rows(), 30);
    assert_eq!(codes.code_length(), 8);
    assert_eq!(labels.rows(), 30);

    // feature dimension mismatch: encode text features of a different dim
    let bad = tmp.path().join("bad");
    let mut kv = KvConfig::default();
    kv.set("n_per_class", "10".into());
    kv.set("dim", "16".into());
    let params = SynthParams::from_config(&kv, Some(7)).unwrap();
    cli::cmd_synth(&params, &bad).unwrap();
    let err = cli::cmd_encode(
        &ckpt,
        &bad.join(cli::FEATURES_X_FILE),
        &bad.join(cli::LABELS_FILE),
        Modality::Img,
        None,
        &tmp.path().join("c.codes"),
    )
    .unwrap_err();
    assert!(matches!(err, dcgh::Error::DimensionMismatch { .. }));
}

#[test]
fn eval_self_retrieval_and_parity_with_library() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 13);
    let model = tmp.path().join("model");
    let cfg = TrainConfig {
        code_length: 8,
        epochs: 4,
        seed: 13,
        ..TrainConfig::default()
    };
    cli::cmd_train(&cfg, &data, &model).unwrap();
    let codes = tmp.path().join("all.codes");
    cli::cmd_encode(
        &model.join(cli::CHECKPOINT_FILE),
        &data.join(cli::FEATURES_X_FILE),
        &data.join(cli::LABELS_FILE),
        Modality::Img,
        None,
        &codes,
    )
    .unwrap();

    // self-retrieval: every query is its own perfect hit
    let out = tmp.path().join("eval");
    let report = cli::cmd_eval(&codes, &codes, Direction::Img2Txt, &out).unwrap();
    assert!(report.map > 0.0 && report.map <= 1.0);
    assert!(out.join("report.json").exists());
    assert!(out.join("pr_curve.csv").exists());
    assert!(out.join("topn_precision.csv").exists());

    // parity: the written report equals an in-process evaluation
    let (qc, ql) = dcgh::encoder::load_codes(&codes).unwrap();
    let (dc, dl) = dcgh::encoder::load_codes(&codes).unwrap();
    let task = dcgh::eval::RetrievalTask::new(qc, ql, dc, dl, Direction::Img2Txt).unwrap();
    let lib = dcgh::eval::evaluate(&task).unwrap();
    assert_eq!(
        std::fs::read_to_string(out.join("report.json")).unwrap(),
        lib.to_json()
    );
}

#[test]
fn eval_rejects_mismatched_code_lengths_and_missing_query() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 17);
    let model = tmp.path().join("model");
    let cfg = TrainConfig {
        code_length: 8,
        epochs: 1,
        seed: 17,
        ..TrainConfig::default()
    };
    cli::cmd_train(&cfg, &data, &model).unwrap();
    let model16 = tmp.path().join("model16");
    let cfg16 = TrainConfig {
        code_length: 16,
        ..cfg
    };
    cli::cmd_train(&cfg16, &data, &model16).unwrap();

    let c8 = tmp.path().join("c8.codes");
    let c16 = tmp.path().join("c16.codes");
    for (model_dir, out) in [(&model, &c8), (&model16, &c16)] {
        cli::cmd_encode(
            &model_dir.join(cli::CHECKPOINT_FILE),
            &data.join(cli::FEATURES_X_FILE),
            &data.join(cli::LABELS_FILE),
            Modality::Img,
            None,
            out,
        )
        .unwrap();
    }
    let err = cli::cmd_eval(&c8, &c16, Direction::Img2Txt, &tmp.path().join("e")).unwrap_err();
    assert!(matches!(err, dcgh::Error::DimensionMismatch { .. }));

    let missing = cli::cmd_eval(
        &tmp.path().join("nope.codes"),
        &c8,
        Direction::Img2Txt,
        &tmp.path().join("e2"),
    );
    assert!(missing.is_err());
}

#[test]
fn encode_subsets_select_split_rows() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 19);
    let model = tmp.path().join("model");
    let cfg = TrainConfig {
        code_length: 8,
        epochs: 1,
        seed: 19,
        ..TrainConfig::default()
    };
    cli::cmd_train(&cfg, &data, &model).unwrap();
    let split = dcgh::data::load_split(&data.join(cli::SPLIT_FILE)).unwrap();

    let out = tmp.path().join("q.codes");
    cli::cmd_encode(
        &model.join(cli::CHECKPOINT_FILE),
        &data.join(cli::FEATURES_X_FILE),
        &data.join(cli::LABELS_FILE),
        Modality::Img,
        Some((data.join(cli::SPLIT_FILE).as_path(), Subset::Query)),
        &out,
    )
    .unwrap();
    let (codes, _) = dcgh::encoder::load_codes(&out).unwrap();
    assert_eq!(codes.rows(), split.query.len());
}

#[test]
fn gradcheck_binary_passes_and_ablate_writes_table() {
    let out = bin().args(["gradcheck", "--instances", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for family in ["proxy", "pairwise", "variance", "total"] {
        assert!(
            stdout.contains(&format!("{family}:")),
            "missing {family} line in: {stdout}"
        );
    }
    assert!(stdout.contains("PASS"));

    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 23);
    let cfg_file = tmp.path().join("train.cfg");
    std::fs::write(&cfg_file, "epochs = 3\nbits = 8\n").unwrap();
    let out = bin()
        .args(["ablate", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("ab"))
        .arg("--config")
        .arg(&cfg_file)
        .arg("--seed")
        .arg("23")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("ab").join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines[0], "variant,map_img2txt,map_txt2img");
    assert_eq!(lines.len(), 5);
    for variant in ["full", "v", "pv", "xv"] {
        assert!(lines.iter().any(|l| l.starts_with(&format!("{variant},"))));
    }
}

#[test]
fn thread_cap_env_is_honored_and_validated() {
    let ok = bin()
        .env("DCGH_THREADS", "2")
        .args(["gradcheck", "--instances", "1"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let auto = bin()
        .env("DCGH_THREADS", "0")
        .args(["gradcheck", "--instances", "1"])
        .output()
        .unwrap();
    assert!(auto.status.success());
    let bad = bin()
        .env("DCGH_THREADS", "lots")
        .args(["gradcheck", "--instances", "1"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("DCGH_THREADS"));
}

#[test]
fn train_rejects_unknown_config_keys() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synth(&data, 29);
    let cfg_file = tmp.path().join("train.cfg");
    std::fs::write(&cfg_file, "epochs = 2\nlearning_rat = 0.1\n").unwrap();
    let out = bin()
        .args(["train", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("m"))
        .arg("--config")
        .arg(&cfg_file)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn full_binary_pipeline_round_trip() {
    let tmp = tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    let run = |args: &[&std::ffi::OsStr]| {
        let out = bin().args(args).output().unwrap();
        assert!(
            out.status.success(),
            "command {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let s = |v: &str| std::ffi::OsString::from(v);
    let synth_cfg = tmp.path().join("synth.cfg");
    std::fs::write(&synth_cfg, "n_per_class = 12\ndim = 16\nn_query = 8\n").unwrap();
    run(&[
        &s("synth"),
        &s("--config"),
        synth_cfg.as_os_str(),
        &s("--out"),
        data.as_os_str(),
        &s("--seed"),
        &s("31"),
    ]);
    run(&[
        &s("train"),
        &s("--data"),
        data.as_os_str(),
        &s("--out"),
        model.as_os_str(),
        &s("--seed"),
        &s("31"),
        &s("--bits"),
        &s("16"),
        &s("--epochs"),
        &s("60"),
    ]);
    let q = tmp.path().join("q.codes");
    let db = tmp.path().join("db.codes");
    run(&[
        &s("encode"),
        &s("--checkpoint"),
        model.join(cli::CHECKPOINT_FILE).as_os_str(),
        &s("--features"),
        data.join(cli::FEATURES_X_FILE).as_os_str(),
        &s("--labels"),
        data.join(cli::LABELS_FILE).as_os_str(),
        &s("--modality"),
        &s("img"),
        &s("--split"),
        data.join(cli::SPLIT_FILE).as_os_str(),
        &s("--subset"),
        &s("query"),
        &s("--out"),
        q.as_os_str(),
    ]);
    run(&[
        &s("encode"),
        &s("--checkpoint"),
        model.join(cli::CHECKPOINT_FILE).as_os_str(),
        &s("--features"),
        data.join(cli::FEATURES_Y_FILE).as_os_str(),
        &s("--labels"),
        data.join(cli::LABELS_FILE).as_os_str(),
        &s("--modality"),
        &s("txt"),
        &s("--split"),
        data.join(cli::SPLIT_FILE).as_os_str(),
        &s("--subset"),
        &s("retrieval"),
        &s("--out"),
        db.as_os_str(),
    ]);
    let eval_dir = tmp.path().join("eval");
    run(&[
        &s("eval"),
        &s("--query"),
        q.as_os_str(),
        &s("--db"),
        db.as_os_str(),
        &s("--direction"),
        &s("Img2Txt"),
        &s("--out"),
        eval_dir.as_os_str(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["direction"], "Img2Txt");
    assert_eq!(report["k"], 16);
    assert!(report["map"].as_f64().unwrap() > 0.0);
}
