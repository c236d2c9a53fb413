use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deepsmote_core::data::{load_idx, write_idx, ImageDataset, Split};
use deepsmote_core::eval::CSV_HEADER;
use serde_json::{json, Value};

const CLASSES: usize = 10;

/// Ten classes of 28x28 images: a bright horizontal bar whose row depends
/// on the class, plus a little deterministic texture.
fn fixture(per_class: usize, salt: u64) -> ImageDataset {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    let mut state = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    for c in 0..CLASSES {
        for _ in 0..per_class {
            for y in 0..28 {
                for _x in 0..28 {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    let noise = (state >> 59) as u8;
                    let on = y >= 2 + 2 * c && y < 5 + 2 * c;
                    pixels.push(if on { 220 + noise } else { noise });
                }
            }
            labels.push(c);
        }
    }
    let labels: Vec<u8> = labels.into_iter().map(|l| l as u8).collect();
    ImageDataset::new(1, 28, 28, CLASSES, pixels, labels, Split::Train).unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let data = root.join("idx");
        fs::create_dir_all(&data).unwrap();
        write_idx(&fixture(24, 1), &data.join("train-images"), &data.join("train-labels")).unwrap();
        write_idx(&fixture(8, 2), &data.join("test-images"), &data.join("test-labels")).unwrap();
        Self { _dir: dir, root }
    }

    fn config(&self) -> Value {
        json!({
            "data": {
                "train_images": "idx/train-images",
                "train_labels": "idx/train-labels",
                "test_images": "idx/test-images",
                "test_labels": "idx/test-labels"
            },
            "seed": 7,
            "output_dir": "out",
            "profile": { "counts": [20, 16, 12, 10, 8, 6, 5, 4, 4, 4] },
            "train": { "arch": { "widths": [4, 4, 4, 4] }, "epochs": 2, "batch_size": 16 },
            "plan": { "k": 3 },
            "eval": {
                "methods": ["none", "deep_smote"],
                "balanced_test": vec![6; 10],
                "imbalanced_test": [8, 6, 5, 4, 3, 2, 2, 1, 1, 1],
                "classifier": { "hidden": 8, "epochs": 1, "batch_size": 16 }
            },
            "sweep": {
                "ratios": [2.0, 5.0],
                "repetitions": 2,
                "methods": ["none", "pixel_smote"],
                "majority": 20
            }
        })
    }

    fn write_config(&self, name: &str, value: &Value) -> PathBuf {
        let path = self.root.join(name);
        fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
        path
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepsmote"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_dataset_path_is_a_config_error_naming_the_field() {
    let ws = Workspace::new();
    let mut cfg = ws.config();
    cfg["data"]["train_labels"] = json!("idx/nope");
    let path = ws.write_config("bad.json", &cfg);
    let out = run(&["train", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("data.train_labels"), "{err}");
}

#[test]
fn seed_is_mandatory_and_flags_override() {
    let ws = Workspace::new();
    let mut cfg = ws.config();
    cfg.as_object_mut().unwrap().remove("seed");
    let path = ws.write_config("noseed.json", &cfg);
    let out = run(&["train", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let out_dir = ws.root.join("flagged");
    run_ok(&["train", "--config", s(&path), "--seed", "3", "--out", s(&out_dir)]);
    let manifest: Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], json!(3));
}

#[test]
fn unknown_field_reports_its_path() {
    let ws = Workspace::new();
    let mut cfg = ws.config();
    cfg["train"]["learning_rate"] = json!(0.1);
    let path = ws.write_config("typo.json", &cfg);
    let out = run(&["train", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train") && err.contains("learning_rate"), "{err}");
}

#[test]
fn train_writes_layout_and_is_reproducible() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    let a = ws.root.join("a");
    let b = ws.root.join("b");
    run_ok(&["train", "--config", s(&path), "--out", s(&a)]);
    run_ok(&["train", "--config", s(&path), "--out", s(&b)]);
    for rel in [
        "checkpoints/encoder.dsmw",
        "checkpoints/decoder.dsmw",
        "reports/loss_history.csv",
        "manifest.json",
    ] {
        let x = fs::read(a.join(rel)).unwrap();
        assert_eq!(x, fs::read(b.join(rel)).unwrap(), "{rel} differs between reruns");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["latent_dim"], json!(300));
    assert_eq!(manifest["lr"], json!(0.0002));
    let history = fs::read_to_string(a.join("reports/loss_history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,reconstruction,penalty,total"));
    assert_eq!(history.lines().count(), 3);
    assert!(!a.join(".lock").exists());
}

#[test]
fn generate_balances_and_writes_one_grid_per_minority_class() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    run_ok(&["train", "--config", s(&path)]);
    run_ok(&["generate", "--config", s(&path)]);
    let out = ws.root.join("out");
    let ds = load_idx(
        &out.join("data/train-images-idx3-ubyte"),
        &out.join("data/train-labels-idx1-ubyte"),
        Split::Synthetic,
    )
    .unwrap();
    assert_eq!(ds.class_counts(), vec![20; CLASSES]);
    for c in 0..CLASSES {
        assert_eq!(out.join(format!("images/class_{c}.png")).exists(), c > 0, "class {c}");
    }
    let sidecar: Value = serde_json::from_slice(&fs::read(out.join("data/augmented.json")).unwrap()).unwrap();
    assert_eq!(sidecar["original_len"], json!(89));
}

#[test]
fn generate_on_balanced_input_is_identity_without_grids() {
    let ws = Workspace::new();
    let mut cfg = ws.config();
    cfg["profile"] = json!({ "counts": vec![6; 10] });
    let path = ws.write_config("flat.json", &cfg);
    run_ok(&["train", "--config", s(&path)]);
    run_ok(&["generate", "--config", s(&path)]);
    let out = ws.root.join("out");
    let ds = load_idx(
        &out.join("data/train-images-idx3-ubyte"),
        &out.join("data/train-labels-idx1-ubyte"),
        Split::Synthetic,
    )
    .unwrap();
    assert_eq!(ds.len(), 60);
    assert!(!out.join("images").exists());
}

#[test]
fn generate_rejects_a_mismatched_checkpoint() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    run_ok(&["train", "--config", s(&path)]);
    let mut cfg = ws.config();
    cfg["train"]["arch"]["widths"] = json!([8, 8, 8, 8]);
    let wide = ws.write_config("wide.json", &cfg);
    let ckpt = ws.root.join("out/checkpoints");
    let out = run(&[
        "generate",
        "--config",
        s(&wide),
        "--checkpoint",
        s(&ckpt),
        "--out",
        s(&ws.root.join("g")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_csv_contract_and_determinism() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    let a = ws.root.join("a");
    let b = ws.root.join("b");
    let stdout = run_ok(&["evaluate", "--config", s(&path), "--out", s(&a)]).stdout;
    run_ok(&["evaluate", "--config", s(&path), "--out", s(&b)]);
    let csv = fs::read_to_string(a.join("reports/metrics.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("reports/metrics.csv")).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 2);
    // paired design: every method row shares the seed and fold columns
    let keys: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].to_string(), f[3].to_string())
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] == w[1]));
    assert!(lines[1..].iter().any(|l| l.starts_with("none,")));
    assert!(lines[1..].iter().any(|l| l.starts_with("deep_smote,")));
    let json: Value = serde_json::from_slice(&fs::read(a.join("reports/metrics.json")).unwrap()).unwrap();
    assert_eq!(json["reference_anchors"][0]["acsa"], json!(96.16));
    assert!(String::from_utf8_lossy(&stdout).contains("protocol"));
}

#[test]
fn sweep_row_count_ordering_and_plots() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    run_ok(&["sweep", "--config", s(&path)]);
    let out = ws.root.join("out");
    let csv = fs::read_to_string(out.join("reports/sweep.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    // two ratios, two methods, two repetitions
    assert_eq!(rows.len(), 2 * 2 * 2);
    let ratios: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
    for name in ["acsa", "gm", "f1"] {
        let file = fs::File::open(out.join(format!("images/sweep_{name}.png"))).unwrap();
        let info = png::Decoder::new(std::io::BufReader::new(file)).read_info().unwrap();
        assert_eq!((info.info().width, info.info().height), (640, 420));
    }
    let json: Value = serde_json::from_slice(&fs::read(out.join("reports/sweep.json")).unwrap()).unwrap();
    assert!(json["baseline_trend_violated"].is_boolean());
}

#[test]
fn a_held_lock_refuses_a_second_writer() {
    let ws = Workspace::new();
    let path = ws.write_config("run.json", &ws.config());
    fs::create_dir_all(ws.root.join("out")).unwrap();
    fs::write(ws.root.join("out/.lock"), b"").unwrap();
    let out = run(&["train", "--config", s(&path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}
