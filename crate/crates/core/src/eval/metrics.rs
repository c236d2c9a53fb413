use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{preds} predictions for {labels} labels")]
    Length { preds: usize, labels: usize },
    #[error("class id {value} outside {classes} classes")]
    OutOfRange { value: usize, classes: usize },
    #[error("class {0} has no true instances; recall is undefined")]
    EmptyClass(usize),
    #[error("confusion matrix needs at least one class")]
    NoClasses,
}

/// `K × K` counts, rows are true classes and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, MetricsError> {
        let classes = rows.len();
        if classes == 0 {
            return Err(MetricsError::NoClasses);
        }
        if let Some(r) = rows.iter().find(|r| r.len() != classes) {
            return Err(MetricsError::Length {
                preds: r.len(),
                labels: classes,
            });
        }
        Ok(Self {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if classes == 0 {
        return Err(MetricsError::NoClasses);
    }
    if preds.len() != labels.len() {
        return Err(MetricsError::Length {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    let mut counts = vec![0u64; classes * classes];
    for (&p, &t) in preds.iter().zip(labels) {
        if let Some(&value) = [p, t].iter().find(|&&v| v >= classes) {
            return Err(MetricsError::OutOfRange { value, classes });
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Which test distribution a report was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Balanced,
    Imbalanced,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Balanced => "balanced",
            Protocol::Imbalanced => "imbalanced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub protocol: Protocol,
    /// Mean per-class recall.
    pub acsa: f64,
    /// Geometric mean of per-class recalls; exactly 0 if any recall is 0.
    pub gm: f64,
    /// Unweighted mean of per-class F1.
    pub macro_f1: f64,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub f1: Vec<f64>,
}

pub fn metrics(cm: &ConfusionMatrix, protocol: Protocol) -> Result<MetricsReport, MetricsError> {
    let k = cm.classes();
    let (mut recall, mut precision, mut f1) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
    for c in 0..k {
        let rows = cm.row_sum(c);
        if rows == 0 {
            return Err(MetricsError::EmptyClass(c));
        }
        let tp = cm.get(c, c) as f64;
        let r = tp / rows as f64;
        let cols = cm.col_sum(c);
        let p = if cols == 0 { 0.0 } else { tp / cols as f64 };
        recall.push(r);
        precision.push(p);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }
    let kf = k as f64;
    let gm = if recall.contains(&0.0) {
        0.0
    } else {
        recall.iter().product::<f64>().powf(1.0 / kf)
    };
    Ok(MetricsReport {
        protocol,
        acsa: recall.iter().sum::<f64>() / kf,
        gm,
        macro_f1: f1.iter().sum::<f64>() / kf,
        recall,
        precision,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap();
        let m = metrics(&cm, Protocol::Balanced).unwrap();
        assert!((m.recall[0] - 0.75).abs() < 1e-12);
        assert!((m.recall[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.precision[0] - 0.6).abs() < 1e-12);
        assert!((m.precision[1] - 0.8).abs() < 1e-12);
        assert!((m.acsa - 0.708_333_333_333).abs() < 1e-9);
        assert!((m.gm - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((m.macro_f1 - (2.0 / 3.0 + 8.0 / 11.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn confusion_basics() {
        let cm = confusion(&[1, 1], &[0, 1], 2).unwrap();
        assert_eq!(cm, ConfusionMatrix::from_rows(&[vec![0, 1], vec![0, 1]]).unwrap());
        let diag = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(diag.get(2, 2), 2);
        assert_eq!(diag.total(), 4);
        assert!(matches!(
            confusion(&[3], &[0], 3),
            Err(MetricsError::OutOfRange { value: 3, .. })
        ));
        assert!(confusion(&[0], &[0, 1], 3).is_err());
    }

    #[test]
    fn perfect_and_missed_class() {
        let m = metrics(&confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), Protocol::Balanced).unwrap();
        assert_eq!((m.acsa, m.gm, m.macro_f1), (1.0, 1.0, 1.0));
        let m = metrics(&confusion(&[0, 0, 2], &[0, 1, 2], 3).unwrap(), Protocol::Balanced).unwrap();
        assert_eq!(m.gm, 0.0);
        assert!(m.acsa > 0.0);
        assert!(matches!(
            metrics(&confusion(&[0], &[0], 2).unwrap(), Protocol::Balanced),
            Err(MetricsError::EmptyClass(1))
        ));
    }
}
