use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::classifier::{train_classifier, ClassifierConfig};
use super::metrics::{confusion, metrics, MetricsError, MetricsReport, Protocol};
use crate::data::{self, DataError, ImageDataset, ImbalanceProfile, Split};
use crate::nn::NnError;
use crate::oversampler::{self, GenerationPlan, OversampleError};
use crate::rng::derive_seed;
use crate::tensor::Tensor;
use crate::trainer::{self, Autoencoder, TrainConfig, TrainError};

pub const CSV_HEADER: &str = "method,ratio,seed,fold,protocol,acsa,gm,f1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Oversample(#[from] OversampleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("provenance violation: {0}")]
    Leak(String),
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    PixelSmote,
    DeepSmote,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::None, Method::PixelSmote, Method::DeepSmote];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::PixelSmote => "pixel_smote",
            Method::DeepSmote => "deep_smote",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected none, pixel_smote or deep_smote"))
    }
}

/// Full-scale reference scores kept in report metadata for context. Desk
/// runs are far smaller and are not expected to reach them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceScore {
    pub dataset: &'static str,
    pub method: &'static str,
    pub acsa: f64,
    pub gm: f64,
    pub f1: f64,
}

pub const REFERENCE_SCORES: &[ReferenceScore] = &[ReferenceScore {
    dataset: "mnist",
    method: "deep_smote",
    acsa: 96.16,
    gm: 98.11,
    f1: 96.44,
}];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub methods: Vec<Method>,
    /// Runs use seeds `seed, seed + 1, ...`.
    pub repetitions: usize,
    /// 1 trains on the whole imbalanced set; k >= 2 runs stratified k-fold
    /// training, one classifier per held-out fold.
    pub folds: usize,
    pub balanced_test: Vec<usize>,
    pub imbalanced_test: Vec<usize>,
    pub classifier: ClassifierConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            methods: vec![Method::None, Method::DeepSmote],
            repetitions: 1,
            folds: 1,
            balanced_test: data::MNIST_BALANCED_TEST.iter().map(|c| c / 10).collect(),
            imbalanced_test: data::MNIST_IMBALANCED_TEST.iter().map(|&c| (c / 10).max(1)).collect(),
            classifier: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: ImbalanceProfile,
    pub train: TrainConfig,
    pub plan: GenerationPlan,
    pub eval: EvalSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: ImbalanceProfile::desk(0),
            train: TrainConfig::default(),
            plan: GenerationPlan::default(),
            eval: EvalSettings::default(),
        }
    }
}

/// Sub-seeds of one run, all derived from its seed by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    pub seed: u64,
}

impl RunSeeds {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn imbalance(&self) -> u64 {
        derive_seed(self.seed, "imbalance")
    }

    pub fn test(&self) -> u64 {
        derive_seed(self.seed, "test")
    }

    pub fn folds(&self) -> u64 {
        derive_seed(self.seed, "folds")
    }

    pub fn train(&self, fold: usize) -> u64 {
        derive_seed(self.seed, &format!("train/{fold}"))
    }

    pub fn smote(&self, fold: usize) -> u64 {
        derive_seed(self.seed, &format!("smote/{fold}"))
    }

    pub fn classifier(&self, fold: usize) -> u64 {
        derive_seed(self.seed, &format!("classifier/{fold}"))
    }

    /// The configured profile, reseeded for this run.
    pub fn profile(&self, profile: &ImbalanceProfile) -> ImbalanceProfile {
        ImbalanceProfile {
            seed: self.imbalance(),
            ..profile.clone()
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub ratio: f64,
    pub seed: u64,
    pub fold: usize,
    pub protocol: Protocol,
    pub acsa: f64,
    pub gm: f64,
    pub f1: f64,
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.method,
            self.ratio,
            self.seed,
            self.fold,
            self.protocol.as_str(),
            self.acsa,
            self.gm,
            self.f1
        )
    }
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub fold: usize,
    /// Class histogram the classifier was trained on.
    pub train_histogram: Vec<usize>,
    pub reports: Vec<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub seed: u64,
    pub ratio: f64,
    pub imbalanced_histogram: Vec<usize>,
    pub runs: Vec<MethodRun>,
    pub records: Vec<RunRecord>,
}

fn ensure_split(ds: &ImageDataset, allowed: &[Split], what: &str) -> Result<(), EvalError> {
    match ds.ids().iter().find(|id| !allowed.contains(&id.split)) {
        Some(id) => Err(EvalError::Leak(format!(
            "{what} contains a {:?} sample (index {})",
            id.split, id.index
        ))),
        None => Ok(()),
    }
}

fn evaluate(
    model: &super::Classifier,
    images: &Tensor,
    ds: &ImageDataset,
    protocol: Protocol,
) -> Result<MetricsReport, EvalError> {
    let preds = model.predict(images)?;
    Ok(metrics(&confusion(&preds, &ds.labels(), ds.class_count())?, protocol)?)
}

/// Imbalance injection, per-method oversampling, classifier training and
/// evaluation on both test protocols, for one seed. Every random choice is
/// derived from `seed`, so methods sharing a seed see the same imbalanced
/// set, folds and test sets. `pretrained` skips autoencoder training for
/// single-fold runs.
pub fn run_experiment(
    train_pool: &ImageDataset,
    test_pool: &ImageDataset,
    cfg: &ExperimentConfig,
    seed: u64,
    pretrained: Option<&Autoencoder>,
) -> Result<ExperimentOutput, EvalError> {
    ensure_split(train_pool, &[Split::Train], "training pool")?;
    ensure_split(test_pool, &[Split::Test], "test pool")?;
    if cfg.eval.methods.is_empty() {
        return Err(EvalError::Config("no methods selected".into()));
    }
    let size = cfg.train.arch.image_size;
    let classes = train_pool.class_count().max(test_pool.class_count());

    let seeds = RunSeeds::new(seed);
    let profile = seeds.profile(&cfg.profile);
    let imbalanced = data::apply_imbalance(train_pool, &profile)?;
    let (bal, imbal) = data::build_test_sets(
        test_pool,
        &cfg.eval.balanced_test,
        &cfg.eval.imbalanced_test,
        seeds.test(),
    )?;
    let tests = [
        (Protocol::Balanced, data::normalize(&bal, size)?, bal),
        (Protocol::Imbalanced, data::normalize(&imbal, size)?, imbal),
    ];

    let fold_sets: Vec<ImageDataset> = match cfg.eval.folds {
        0 => return Err(EvalError::Config("folds must be at least 1".into())),
        1 => vec![imbalanced.clone()],
        k => {
            let folds = data::make_folds(&imbalanced, k, seeds.folds())?;
            (0..k)
                .map(|f| imbalanced.subset(&folds.training(f)))
                .collect::<Result<_, _>>()?
        }
    };
    if pretrained.is_some() && fold_sets.len() > 1 {
        return Err(EvalError::Config(
            "a pretrained autoencoder only applies to single-fold runs".into(),
        ));
    }

    let mut out = ExperimentOutput {
        seed,
        ratio: profile.ratio(),
        imbalanced_histogram: imbalanced.class_counts(),
        runs: Vec::new(),
        records: Vec::new(),
    };
    for (fold, train_set) in fold_sets.iter().enumerate() {
        let plan = GenerationPlan {
            seed: seeds.smote(fold),
            ..cfg.plan.clone()
        };
        for &method in &cfg.eval.methods {
            let augmented = match method {
                Method::None => train_set.clone(),
                Method::PixelSmote => oversampler::pixel_smote(train_set, &plan)?.dataset,
                Method::DeepSmote => {
                    let trained;
                    let ae = match pretrained {
                        Some(ae) => ae,
                        None => {
                            let tc = TrainConfig {
                                seed: seeds.train(fold),
                                ..cfg.train.clone()
                            };
                            let x = data::normalize(train_set, size)?;
                            trained = trainer::train(&x, &train_set.labels(), &tc)?.model;
                            &trained
                        }
                    };
                    oversampler::generate_balanced(ae, train_set, &plan)?.dataset
                }
            };
            ensure_split(&augmented, &[Split::Train, Split::Synthetic], "classifier training set")?;
            let ccfg = ClassifierConfig {
                seed: seeds.classifier(fold),
                ..cfg.eval.classifier.clone()
            };
            let model = train_classifier(&data::normalize(&augmented, size)?, &augmented.labels(), classes, &ccfg)?;
            let mut reports = Vec::new();
            for (protocol, images, ds) in &tests {
                let report = evaluate(&model, images, ds, *protocol)?;
                log::info!(
                    "seed {seed} fold {fold} {method} {}: acsa {:.4} gm {:.4} f1 {:.4}",
                    protocol.as_str(),
                    report.acsa,
                    report.gm,
                    report.macro_f1
                );
                out.records.push(RunRecord {
                    method,
                    ratio: out.ratio,
                    seed,
                    fold,
                    protocol: *protocol,
                    acsa: report.acsa,
                    gm: report.gm,
                    f1: report.macro_f1,
                });
                reports.push(report);
            }
            out.runs.push(MethodRun {
                method,
                fold,
                train_histogram: augmented.class_counts(),
                reports,
            });
        }
    }
    Ok(out)
}
