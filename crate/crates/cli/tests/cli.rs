mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::Blobs;
use ndcal::{BinaryCalibrator, NestedDichotomy};
use tempfile::TempDir;

fn ndcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_csv(dir: &Path, name: &str, classes: usize, per_class: usize, seed: u64) -> PathBuf {
    let data = Blobs::new(classes, 3, 3.0, 42).draw(per_class, seed);
    let mut text = String::from("a,b,c,label\n");
    for (x, &y) in data.rows().iter().zip(data.labels()) {
        let v = x.to_dense(3);
        text.push_str(&format!("{},{},{},c{y}\n", v[0], v[1], v[2]));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn train_model(dir: &TempDir, classes: usize, extra: &[&str]) -> (PathBuf, PathBuf) {
    let data = write_csv(dir.path(), "train.csv", classes, 20, 1);
    let model = dir.path().join("model.json");
    let mut args = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    assert_ok(&ndcal(&args));
    (data, model)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_data_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = ndcal(&["train", "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_model_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "d.csv", 3, 5, 1);
    let model = dir.path().join("bad.json");
    fs::write(&model, "{\"structure\": [1, 2").unwrap();
    let out = ndcal(&["evaluate", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trained_model_loads_and_predicts() {
    let dir = TempDir::new().unwrap();
    let (_, model) = train_model(&dir, 4, &[]);
    let nd: NestedDichotomy = NestedDichotomy::load(&model).unwrap();
    assert_eq!(nd.num_classes(), 4);
    assert_eq!(nd.num_features(), 3);
    let test = Blobs::new(4, 3, 3.0, 42).draw(5, 9);
    for x in test.rows() {
        let p = nd.predict_distribution(x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn internal_isotonic_flag_reaches_every_node() {
    let dir = TempDir::new().unwrap();
    let (_, model) = train_model(&dir, 5, &["--internal-cal", "isotonic"]);
    let nd: NestedDichotomy = NestedDichotomy::load(&model).unwrap();
    let structure = nd.structure();
    let mut isotonic = 0;
    for k in structure.internal_nodes() {
        match &nd.node(k).unwrap().calibrator {
            BinaryCalibrator::Isotonic(_) => isotonic += 1,
            BinaryCalibrator::Identity => assert!(nd.node(k).unwrap().calibration_skipped),
            other => panic!("unexpected calibrator {other:?}"),
        }
    }
    assert!(isotonic > 0);
}

#[test]
fn single_bin_evaluation() {
    let dir = TempDir::new().unwrap();
    let (data, model) = train_model(&dir, 3, &[]);
    let out_dir = dir.path().join("eval");
    let out = ndcal(&[
        "evaluate",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--bins",
        "1",
        "--out",
        s(&out_dir),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(out_dir.join("bins.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let fields: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields[3], 60.0);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ece = summary["ece"].as_f64().unwrap();
    assert!((ece - (fields[4] - fields[5]).abs()).abs() < 1e-12);
}

#[test]
fn two_class_reliability_has_one_depth_with_consistent_ece() {
    let dir = TempDir::new().unwrap();
    let (data, model) = train_model(&dir, 2, &[]);
    let out = ndcal(&["reliability", "--model", s(&model), "--data", s(&data), "--bins", "5"]);
    assert_ok(&out);
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().all(|r| r[0] == 1.0));
    let n: f64 = rows.iter().map(|r| r[3]).sum();
    assert_eq!(n, 40.0);
    let ece: f64 = rows.iter().map(|r| r[3] / n * (r[1] - r[2]).abs()).sum();
    assert!(rows.iter().all(|r| (r[4] - ece).abs() < 1e-12));
}

#[test]
fn repeated_cross_validation_reports_every_fold() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "cv.csv", 3, 20, 2);
    let run = |out: &Path| {
        assert_ok(&ndcal(&[
            "experiment",
            "--data",
            s(&data),
            "--cv",
            "3x2",
            "--seed",
            "11",
            "--out",
            s(out),
        ]));
        (
            fs::read_to_string(out.join("folds.csv")).unwrap(),
            fs::read_to_string(out.join("aggregate.csv")).unwrap(),
        )
    };
    let (folds, aggregate) = run(&dir.path().join("a"));
    let (header, rows) = folds.split_once('\n').unwrap();
    let columns: Vec<&str> = header.split(',').collect();
    let nll_col = columns.iter().position(|&c| c == "nll").unwrap();
    let nlls: Vec<f64> = rows
        .lines()
        .map(|l| l.split(',').nth(nll_col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(nlls.len(), 6);
    let mean_col = aggregate
        .lines()
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == "nll_mean")
        .unwrap();
    let mean: f64 = aggregate
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(mean_col)
        .unwrap()
        .parse()
        .unwrap();
    assert!((mean - nlls.iter().sum::<f64>() / 6.0).abs() < 1e-9);

    assert_eq!(run(&dir.path().join("b")), (folds, aggregate));
}

#[test]
fn config_file_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "d.csv", 3, 10, 3);
    let config = dir.path().join("exp.toml");
    fs::write(&config, format!("data = {:?}\ncv = \"2x2\"\nholdout = 0.7\n", s(&data))).unwrap();
    assert_eq!(ndcal(&["experiment", "--config", s(&config)]).status.code(), Some(2));
    assert_ok(&ndcal(&["experiment", "--config", s(&config), "--holdout", "0.2"]));
}

#[test]
fn bundled_optdigits_shape() {
    let out = ndcal_cli::commands::load_dataset(
        &common::optdigits_path(),
        ndcal_cli::DataFormat::Csv,
        ndcal::LabelColumn::Last,
    )
    .unwrap();
    assert_eq!((out.len(), out.num_classes(), out.num_features()), (1797, 10, 64));
}
