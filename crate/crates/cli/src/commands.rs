use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use deepsmote_core::data::{self, ImageDataset, Split};
use deepsmote_core::eval::{self, plot, RunRecord, RunSeeds, SweepResult, CSV_HEADER, METRIC_NAMES, REFERENCE_SCORES};
use deepsmote_core::oversampler::{self, GenerationPlan, SyntheticRange};
use deepsmote_core::trainer::{self, Autoencoder, LossRecord, TrainConfig};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliError;
use crate::lock::OutputLock;

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const REPORT_DIR: &str = "reports";
pub const IMAGE_DIR: &str = "images";
pub const DATA_DIR: &str = "data";
pub const MANIFEST: &str = "manifest.json";

const GRID_SIDE: usize = 10;

fn mkdir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn load_train(r: &Resolved) -> Result<ImageDataset, CliError> {
    let d = &r.config.data;
    Ok(data::load_idx(&d.train_images, &d.train_labels, Split::Train)?)
}

fn load_test(r: &Resolved) -> Result<ImageDataset, CliError> {
    let (images, labels) = r.test_paths()?;
    Ok(data::load_idx(images, labels, Split::Test)?)
}

/// The imbalanced training set every subcommand derives from the master seed.
fn imbalanced_train(r: &Resolved, pool: &ImageDataset) -> Result<ImageDataset, CliError> {
    let profile = RunSeeds::new(r.seed).profile(&r.profile);
    Ok(data::apply_imbalance(pool, &profile)?)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    latent_dim: usize,
    lr: f64,
    seed: u64,
    epochs_run: usize,
    plateaued: bool,
    train_histogram: Vec<usize>,
    final_loss: Option<&'a LossRecord>,
    config: &'a crate::config::RunConfig,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint_dir: PathBuf,
    pub history: Vec<LossRecord>,
    pub plateaued: bool,
}

/// Trains the autoencoder on the seeded imbalanced training set and writes
/// checkpoints, the loss history and a manifest.
pub fn cmd_train(r: &Resolved) -> Result<TrainSummary, CliError> {
    let _lock = OutputLock::acquire(&r.out)?;
    let pool = load_train(r)?;
    let ds = imbalanced_train(r, &pool)?;
    let tc = TrainConfig {
        seed: RunSeeds::new(r.seed).train(0),
        ..r.config.train.clone()
    };
    let x = data::normalize(&ds, tc.arch.image_size)?;
    log::info!("training on {} images, histogram {:?}", ds.len(), ds.class_counts());
    let outcome = trainer::train(&x, &ds.labels(), &tc)?;

    let ckpt = mkdir(&r.out.join(CHECKPOINT_DIR))?;
    outcome.model.save(&ckpt)?;
    let reports = mkdir(&r.out.join(REPORT_DIR))?;
    let mut csv = String::from("epoch,reconstruction,penalty,total\n");
    for h in &outcome.history {
        let _ = writeln!(
            csv,
            "{},{:.6},{:.6},{:.6}",
            h.epoch, h.reconstruction, h.penalty, h.total
        );
    }
    write_text(&reports.join("loss_history.csv"), &csv)?;
    write_json(
        &r.out.join(MANIFEST),
        &Manifest {
            latent_dim: tc.arch.latent_dim,
            lr: tc.adam.lr,
            seed: r.seed,
            epochs_run: outcome.history.len(),
            plateaued: outcome.plateaued,
            train_histogram: ds.class_counts(),
            final_loss: outcome.history.last(),
            config: &r.config,
        },
    )?;
    Ok(TrainSummary {
        checkpoint_dir: ckpt,
        history: outcome.history,
        plateaued: outcome.plateaued,
    })
}

#[derive(Debug, Serialize)]
struct AugmentedSidecar {
    seed: u64,
    original_len: usize,
    class_counts: Vec<usize>,
    synthetic: Vec<SyntheticRange>,
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub class_counts: Vec<usize>,
    pub grids: Vec<PathBuf>,
    pub images_path: PathBuf,
    pub labels_path: PathBuf,
}

/// Balances the seeded imbalanced training set with a trained autoencoder
/// and exports it as IDX plus one PNG grid per class that gained synthetics.
pub fn cmd_generate(r: &Resolved, checkpoint: Option<&Path>) -> Result<GenerateSummary, CliError> {
    let _lock = OutputLock::acquire(&r.out)?;
    let ckpt = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| r.out.join(CHECKPOINT_DIR));
    let ae = Autoencoder::load(&r.config.train.arch, &ckpt)?;
    let pool = load_train(r)?;
    let ds = imbalanced_train(r, &pool)?;
    let plan = GenerationPlan {
        seed: RunSeeds::new(r.seed).smote(0),
        ..r.config.plan.clone()
    };
    let aug = oversampler::generate_balanced(&ae, &ds, &plan)?;

    let data_dir = mkdir(&r.out.join(DATA_DIR))?;
    let images_path = data_dir.join("train-images-idx3-ubyte");
    let labels_path = data_dir.join("train-labels-idx1-ubyte");
    data::write_idx(&aug.dataset, &images_path, &labels_path)?;
    write_json(
        &data_dir.join("augmented.json"),
        &AugmentedSidecar {
            seed: r.seed,
            original_len: aug.original_len,
            class_counts: aug.dataset.class_counts(),
            synthetic: aug.ranges.iter().copied().filter(|s| s.end > s.start).collect(),
        },
    )?;

    let image_dir = r.out.join(IMAGE_DIR);
    let mut grids = Vec::new();
    for range in aug.ranges.iter().filter(|s| s.end > s.start) {
        let Some(synth) = aug.synthetic_of(range.class) else {
            continue;
        };
        let Some((rows, cols)) = oversampler::grid_shape(synth.len(), GRID_SIDE) else {
            continue;
        };
        mkdir(&image_dir)?;
        let path = image_dir.join(format!("class_{}.png", range.class));
        oversampler::export_image_grid(&synth, rows, cols, &path)?;
        grids.push(path);
    }
    Ok(GenerateSummary {
        class_counts: aug.dataset.class_counts(),
        grids,
        images_path,
        labels_path,
    })
}

#[derive(Debug, Serialize)]
struct MetricsJson<'a> {
    seed: u64,
    ratio: f64,
    imbalanced_histogram: &'a [usize],
    records: &'a [RunRecord],
    reference_anchors: &'a [eval::ReferenceScore],
}

#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub records: Vec<RunRecord>,
    pub csv_path: PathBuf,
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut csv = format!("{CSV_HEADER}\n");
    for rec in records {
        csv.push_str(&rec.csv_row());
        csv.push('\n');
    }
    csv
}

/// Fixed-width console table of metric rows.
pub fn summary_table(records: &[RunRecord]) -> String {
    let mut out = format!(
        "{:<12} {:>8} {:>6} {:>5} {:<11} {:>8} {:>8} {:>8}\n",
        "method", "ratio", "seed", "fold", "protocol", "acsa", "gm", "f1"
    );
    for r in records {
        let _ = writeln!(
            out,
            "{:<12} {:>8.2} {:>6} {:>5} {:<11} {:>8.4} {:>8.4} {:>8.4}",
            r.method.as_str(),
            r.ratio,
            r.seed,
            r.fold,
            r.protocol.as_str(),
            r.acsa,
            r.gm,
            r.f1
        );
    }
    out
}

/// Runs every configured method on both test protocols. A checkpoint, when
/// given, replaces autoencoder training for `deep_smote`.
pub fn cmd_evaluate(r: &Resolved, checkpoint: Option<&Path>) -> Result<EvaluateSummary, CliError> {
    let _lock = OutputLock::acquire(&r.out)?;
    let pretrained = match checkpoint {
        Some(dir) => Some(Autoencoder::load(&r.config.train.arch, dir)?),
        None => None,
    };
    let train = load_train(r)?;
    let test = load_test(r)?;
    let out = eval::run_experiment(&train, &test, &r.experiment(), r.seed, pretrained.as_ref())?;

    let reports = mkdir(&r.out.join(REPORT_DIR))?;
    let csv_path = reports.join("metrics.csv");
    write_text(&csv_path, &records_csv(&out.records))?;
    write_json(
        &reports.join("metrics.json"),
        &MetricsJson {
            seed: out.seed,
            ratio: out.ratio,
            imbalanced_histogram: &out.imbalanced_histogram,
            records: &out.records,
            reference_anchors: REFERENCE_SCORES,
        },
    )?;
    Ok(EvaluateSummary {
        records: out.records,
        csv_path,
    })
}

#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    seed: u64,
    result: &'a SweepResult,
    /// Set when `none` improved with a larger ratio somewhere, against the
    /// expectation that metrics fall as imbalance grows.
    baseline_trend_violated: bool,
}

/// Runs the ratio sweep and writes the CSV, JSON summary and one plot per metric.
pub fn cmd_sweep(r: &Resolved) -> Result<SweepResult, CliError> {
    let _lock = OutputLock::acquire(&r.out)?;
    let train = load_train(r)?;
    let test = load_test(r)?;
    let result = eval::sweep(&train, &test, &r.experiment(), &r.config.sweep, r.seed)?;

    let violated = result
        .trends
        .iter()
        .any(|t| t.method == eval::Method::None && !t.increases.is_empty());
    if violated {
        log::warn!("baseline metrics rose with the imbalance ratio; see sweep.json trends");
    }
    let reports = mkdir(&r.out.join(REPORT_DIR))?;
    write_text(&reports.join("sweep.csv"), &records_csv(&result.records))?;
    write_json(
        &reports.join("sweep.json"),
        &SweepJson {
            seed: r.seed,
            result: &result,
            baseline_trend_violated: violated,
        },
    )?;
    let images = mkdir(&r.out.join(IMAGE_DIR))?;
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        plot::plot_metric(&result, m, &images.join(format!("sweep_{name}.png")))?;
    }
    Ok(result)
}
