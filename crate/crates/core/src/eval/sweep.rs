use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, EvalError, ExperimentConfig, Method, RunRecord};
use super::metrics::Protocol;
use crate::data::{ImageDataset, ImbalanceProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Majority-to-smallest-class ratios, strictly increasing.
    pub ratios: Vec<f64>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    /// Count kept for the majority class; defaults to the profile maximum.
    pub majority: Option<usize>,
    pub protocol: Protocol,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ratios: vec![20.0, 100.0, 400.0],
            repetitions: 2,
            methods: vec![Method::None, Method::DeepSmote],
            majority: None,
            protocol: Protocol::Balanced,
        }
    }
}

/// Mean and sample standard deviation of the three metrics over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: Method,
    pub ratio: f64,
    pub runs: usize,
    pub mean: [f64; 3],
    pub sd: [f64; 3],
}

/// Places where a metric rose with the imbalance ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub method: Method,
    pub metric: String,
    pub increases: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub points: Vec<SweepPoint>,
    pub records: Vec<RunRecord>,
    pub trends: Vec<Trend>,
}

pub const METRIC_NAMES: [&str; 3] = ["acsa", "gm", "f1"];

impl SweepResult {
    pub fn series(&self, method: Method) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.method == method).collect()
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.points.iter().map(|p| p.method).collect();
        m.sort();
        m.dedup();
        m
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Repeats the experiment over a geometric profile per ratio. Rows and
/// points are ordered by ratio, then repetition or method.
pub fn sweep(
    train_pool: &ImageDataset,
    test_pool: &ImageDataset,
    base: &ExperimentConfig,
    sc: &SweepConfig,
    seed: u64,
) -> Result<SweepResult, EvalError> {
    if sc.ratios.is_empty() || sc.repetitions == 0 || sc.methods.is_empty() {
        return Err(EvalError::Config(
            "sweep needs ratios, methods and at least one repetition".into(),
        ));
    }
    if sc.ratios.windows(2).any(|w| !(w[0] < w[1])) || !(sc.ratios[0] >= 1.0) {
        return Err(EvalError::Config(format!(
            "ratios must be >= 1 and strictly increasing: {:?}",
            sc.ratios
        )));
    }
    let classes = base.profile.counts.len();
    let majority = sc
        .majority
        .unwrap_or_else(|| base.profile.counts.iter().copied().max().unwrap_or(0));
    let mut records = Vec::new();
    let mut points = Vec::new();
    for &ratio in &sc.ratios {
        let mut cfg = base.clone();
        cfg.profile = ImbalanceProfile {
            class_order: base.profile.class_order.clone(),
            ..ImbalanceProfile::geometric(majority, ratio, classes, 0)?
        };
        cfg.eval.methods = sc.methods.clone();
        cfg.eval.folds = 1;
        let mut at_ratio = Vec::new();
        for r in 0..sc.repetitions {
            let out = run_experiment(train_pool, test_pool, &cfg, seed + r as u64, None)?;
            at_ratio.extend(
                out.records
                    .into_iter()
                    .filter(|rec| rec.protocol == sc.protocol)
                    .map(|rec| RunRecord { ratio, ..rec }),
            );
        }
        for &method in &sc.methods {
            let rows: Vec<&RunRecord> = at_ratio.iter().filter(|r| r.method == method).collect();
            let stats: Vec<(f64, f64)> = [
                rows.iter().map(|r| r.acsa).collect::<Vec<_>>(),
                rows.iter().map(|r| r.gm).collect(),
                rows.iter().map(|r| r.f1).collect(),
            ]
            .iter()
            .map(|v| mean_sd(v))
            .collect();
            points.push(SweepPoint {
                method,
                ratio,
                runs: rows.len(),
                mean: [stats[0].0, stats[1].0, stats[2].0],
                sd: [stats[0].1, stats[1].1, stats[2].1],
            });
        }
        records.extend(at_ratio);
    }
    let mut trends = Vec::new();
    for &method in &sc.methods {
        let series: Vec<&SweepPoint> = points.iter().filter(|p| p.method == method).collect();
        for (m, name) in METRIC_NAMES.iter().enumerate() {
            trends.push(Trend {
                method,
                metric: name.to_string(),
                increases: series
                    .windows(2)
                    .filter(|w| w[1].mean[m] > w[0].mean[m])
                    .map(|w| (w[0].ratio, w[1].ratio))
                    .collect(),
            });
        }
    }
    Ok(SweepResult {
        protocol: sc.protocol,
        points,
        records,
        trends,
    })
}
