//! Skew-insensitive evaluation: confusion-matrix metrics, the desk
//! classifier, single experiments, imbalance-ratio sweeps and sweep plots.

mod classifier;
mod experiment;
mod metrics;
pub mod plot;
mod sweep;

pub use classifier::{train_classifier, Classifier, ClassifierConfig};
pub use experiment::{
    run_experiment, EvalError, EvalSettings, ExperimentConfig, ExperimentOutput, Method, MethodRun, ReferenceScore,
    RunRecord, RunSeeds, CSV_HEADER, REFERENCE_SCORES,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, MetricsError, MetricsReport, Protocol};
pub use sweep::{sweep, SweepConfig, SweepPoint, SweepResult, Trend, METRIC_NAMES};
