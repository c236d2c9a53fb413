use std::path::{Path, PathBuf};

use deepsmote_core::data::ImbalanceProfile;
use deepsmote_core::eval::{EvalSettings, ExperimentConfig, SweepConfig};
use deepsmote_core::oversampler::GenerationPlan;
use deepsmote_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// IDX file pairs. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    /// Master seed; every random stream descends from it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Explicit per-class counts. Mutually exclusive with `ratio`.
    #[serde(default)]
    pub profile: Option<ImbalanceProfile>,
    /// Geometric profile with this majority/minority ratio over `classes`
    /// classes and `majority` majority instances.
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default = "default_majority")]
    pub majority: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub plan: GenerationPlan,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_majority() -> usize {
    400
}

fn default_classes() -> usize {
    10
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A validated config with paths resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub profile: ImbalanceProfile,
}

impl Resolved {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            profile: self.profile.clone(),
            train: self.config.train.clone(),
            plan: self.config.plan.clone(),
            eval: self.config.eval.clone(),
        }
    }

    pub fn test_paths(&self) -> Result<(&Path, &Path), CliError> {
        match (&self.config.data.test_images, &self.config.data.test_labels) {
            (Some(i), Some(l)) => Ok((i, l)),
            (None, _) => Err(CliError::Config("data.test_images: required by this command".into())),
            (_, None) => Err(CliError::Config("data.test_labels: required by this command".into())),
        }
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })
}

fn check_file(field: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: file not found: {}", path.display())))
    }
}

/// Reads, parses and validates a config file, applying `overrides`.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(parse(&text)?, base, overrides)
}

pub fn resolve(mut config: RunConfig, base: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
    let d = &mut config.data;
    for p in [&mut d.train_images, &mut d.train_labels] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    for p in [&mut d.test_images, &mut d.test_labels].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    check_file("data.train_images", &d.train_images)?;
    check_file("data.train_labels", &d.train_labels)?;
    if let Some(p) = &d.test_images {
        check_file("data.test_images", p)?;
    }
    if let Some(p) = &d.test_labels {
        check_file("data.test_labels", p)?;
    }

    let seed = overrides
        .seed
        .or(config.seed)
        .ok_or_else(|| CliError::Config("seed: required (set it in the config or pass --seed)".into()))?;
    config.seed = Some(seed);
    let out = overrides
        .out
        .clone()
        .or_else(|| {
            config
                .output_dir
                .clone()
                .map(|o| if o.is_relative() { base.join(o) } else { o })
        })
        .ok_or_else(|| CliError::Config("output_dir: required (set it in the config or pass --out)".into()))?;

    let profile = match (&config.profile, config.ratio) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "profile: give either profile or ratio, not both".into(),
            ));
        }
        (Some(p), None) => p.clone(),
        (None, Some(r)) => ImbalanceProfile::geometric(config.majority, r, config.classes, 0)
            .map_err(|e| CliError::Config(format!("ratio: {e}")))?,
        (None, None) => ImbalanceProfile::desk(0),
    };
    if profile.counts.is_empty() || profile.counts.contains(&0) {
        return Err(CliError::Config(
            "profile.counts: every class needs at least one instance".into(),
        ));
    }
    config
        .train
        .validate()
        .map_err(|e| CliError::Config(format!("train: {e}")))?;
    if config.plan.k == 0 {
        return Err(CliError::Config("plan.k: must be at least 1".into()));
    }
    if config.eval.repetitions == 0 {
        return Err(CliError::Config("eval.repetitions: must be at least 1".into()));
    }
    if config.eval.methods.is_empty() {
        return Err(CliError::Config("eval.methods: list at least one method".into()));
    }
    Ok(Resolved {
        config,
        seed,
        out,
        profile,
    })
}
