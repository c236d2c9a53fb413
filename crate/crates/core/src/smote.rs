//! Exact SMOTE over real vector spaces: within-class k-nearest neighbours
//! (Euclidean, ties to the lower index) and convex interpolation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoteError {
    #[error("class {class} has {size} member(s); neighbours need at least 2")]
    ClassTooSmall { class: usize, size: usize },
    #[error("class {class} has no members but {requested} synthetic samples were requested")]
    EmptyClass { class: usize, requested: usize },
    #[error("target {target} for class {class} is below its current count {current}")]
    TargetBelowCount {
        class: usize,
        target: usize,
        current: usize,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("interpolation weight {0} outside [0, 1]")]
    Weight(f64),
    #[error("invalid vectors: {0}")]
    Invalid(String),
    #[error("k must be at least 1")]
    ZeroK,
}

/// `N × D` matrix of vectors with one class id each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVectors {
    dim: usize,
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl LabeledVectors {
    pub fn new(dim: usize, data: Vec<f32>, labels: Vec<usize>) -> Result<Self, SmoteError> {
        if dim == 0 {
            return Err(SmoteError::Invalid("dimension must be >= 1".into()));
        }
        if data.len() != dim * labels.len() {
            return Err(SmoteError::Invalid(format!(
                "{} values for {} labels of dimension {dim}",
                data.len(),
                labels.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SmoteError::Invalid("non-finite value".into()));
        }
        Ok(Self { dim, data, labels })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-class counts, sized to the largest label present.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.iter().max().map_or(0, |&m| m + 1)];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    fn push(&mut self, row: &[f32], label: usize) {
        self.data.extend_from_slice(row);
        self.labels.push(label);
    }
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Neighbour lists for the members of one class. Indices are row indices
/// into the source [`LabeledVectors`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassNeighbors {
    pub members: Vec<usize>,
    pub neighbors: Vec<Vec<usize>>,
}

/// For each member of `class`, its `min(k, size - 1)` nearest other members,
/// closest first, equal distances ordered by ascending index.
pub fn knn_within_class(data: &LabeledVectors, class: usize, k: usize) -> Result<ClassNeighbors, SmoteError> {
    if k == 0 {
        return Err(SmoteError::ZeroK);
    }
    let members = data.members(class);
    if members.len() < 2 {
        return Err(SmoteError::ClassTooSmall {
            class,
            size: members.len(),
        });
    }
    let k = k.min(members.len() - 1);
    let n = members.len();
    let mut dist = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let d = squared_distance(data.row(members[a]), data.row(members[b]));
            dist[a * n + b] = d;
            dist[b * n + a] = d;
        }
    }
    let neighbors = (0..n)
        .map(|a| {
            let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
            others.sort_by(|&x, &y| {
                dist[a * n + x]
                    .total_cmp(&dist[a * n + y])
                    .then(members[x].cmp(&members[y]))
            });
            others.truncate(k);
            others.into_iter().map(|b| members[b]).collect()
        })
        .collect();
    Ok(ClassNeighbors { members, neighbors })
}

/// `x + u (neighbor - x)`.
pub fn interpolate(x: &[f32], neighbor: &[f32], u: f32) -> Result<Vec<f32>, SmoteError> {
    if x.len() != neighbor.len() {
        return Err(SmoteError::Dimension(x.len(), neighbor.len()));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(SmoteError::Weight(u as f64));
    }
    Ok(x.iter().zip(neighbor).map(|(&a, &b)| a + u * (b - a)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    /// Desired final count per class id; classes past the end keep their count.
    pub targets: Vec<usize>,
    pub seed: u64,
}

/// Where one synthetic vector came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolation {
    pub base: usize,
    pub neighbor: usize,
    pub weight: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub synthetic: LabeledVectors,
    /// One entry per synthetic row.
    pub origins: Vec<Interpolation>,
}

/// Generates `targets[c] - count[c]` synthetic vectors per class. Each picks
/// a member uniformly, one of its k neighbours uniformly and a weight
/// `u ∈ [0, 1)`. A class with a single member is replicated instead. Every
/// class draws from its own stream derived from the seed; output is grouped
/// by ascending class id.
pub fn oversample(data: &LabeledVectors, cfg: &SmoteConfig) -> Result<SmoteOutput, SmoteError> {
    if cfg.k == 0 {
        return Err(SmoteError::ZeroK);
    }
    let counts = data.class_counts();
    let mut out = SmoteOutput {
        synthetic: LabeledVectors::empty(data.dim()),
        origins: Vec::new(),
    };
    for (class, &target) in cfg.targets.iter().enumerate() {
        let current = counts.get(class).copied().unwrap_or(0);
        if target < current {
            return Err(SmoteError::TargetBelowCount { class, target, current });
        }
        let needed = target - current;
        if needed == 0 {
            continue;
        }
        let mut rng = rng::stream(cfg.seed, &format!("smote/class/{class}"));
        match current {
            0 => {
                return Err(SmoteError::EmptyClass {
                    class,
                    requested: needed,
                })
            }
            1 => {
                let only = data.members(class)[0];
                log::warn!("class {class} has a single member; replicating it {needed} times");
                for _ in 0..needed {
                    out.synthetic.push(data.row(only), class);
                    out.origins.push(Interpolation {
                        base: only,
                        neighbor: only,
                        weight: 0.0,
                    });
                }
            }
            _ => {
                let nn = knn_within_class(data, class, cfg.k)?;
                for _ in 0..needed {
                    let m = rng.random_range(0..nn.members.len());
                    let list = &nn.neighbors[m];
                    let neighbor = list[rng.random_range(0..list.len())];
                    let weight: f32 = rng.random_range(0.0..1.0);
                    let base = nn.members[m];
                    let row = interpolate(data.row(base), data.row(neighbor), weight)?;
                    out.synthetic.push(&row, class);
                    out.origins.push(Interpolation { base, neighbor, weight });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(rows: &[[f32; 2]], labels: &[usize]) -> LabeledVectors {
        LabeledVectors::new(2, rows.iter().flatten().copied().collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn three_points_on_a_line() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]], &[0, 0, 0]);
        let nn = knn_within_class(&d, 0, 1).unwrap();
        assert_eq!(nn.neighbors, vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn duplicates_are_mutual_neighbours() {
        let d = points(&[[2.0, 3.0], [2.0, 3.0]], &[4, 4]);
        let nn = knn_within_class(&d, 4, 1).unwrap();
        assert_eq!(nn.neighbors, vec![vec![1], vec![0]]);
        assert_eq!(squared_distance(d.row(0), d.row(1)), 0.0);
    }

    #[test]
    fn k_clamped_to_class_size() {
        let d = points(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], &[1, 1, 1]);
        let nn = knn_within_class(&d, 1, 5).unwrap();
        assert!(nn.neighbors.iter().all(|l| l.len() == 2));
    }

    #[test]
    fn ties_broken_by_index() {
        // 1 and 2 are equidistant from 0
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]], &[0, 0, 0]);
        let nn = knn_within_class(&d, 0, 1).unwrap();
        assert_eq!(nn.neighbors[0], vec![1]);
    }

    #[test]
    fn small_class_rejected() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0]], &[0, 1]);
        assert_eq!(
            knn_within_class(&d, 1, 3),
            Err(SmoteError::ClassTooSmall { class: 1, size: 1 })
        );
    }

    #[test]
    fn interpolation_endpoints() {
        let x = [0.5f32, -2.0];
        let n = [4.0f32, 8.0];
        assert_eq!(interpolate(&x, &n, 0.0).unwrap(), x.to_vec());
        assert_eq!(interpolate(&x, &n, 1.0).unwrap(), n.to_vec());
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 4.0], 0.25).unwrap(), vec![0.5, 1.0]);
        assert!(interpolate(&x, &[1.0], 0.5).is_err());
        assert!(interpolate(&x, &n, 1.5).is_err());
    }

    #[test]
    fn targets_equal_counts_yield_nothing() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]], &[0, 0, 1]);
        let out = oversample(
            &d,
            &SmoteConfig {
                k: 5,
                targets: vec![2, 1],
                seed: 1,
            },
        )
        .unwrap();
        assert!(out.synthetic.is_empty());
    }

    #[test]
    fn singleton_is_replicated() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [5.0, 7.0]], &[0, 0, 1]);
        let out = oversample(
            &d,
            &SmoteConfig {
                k: 5,
                targets: vec![2, 3],
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(out.synthetic.len(), 2);
        assert_eq!(out.synthetic.labels(), &[1, 1]);
        assert_eq!(out.synthetic.row(0), &[5.0, 7.0]);
        assert_eq!(out.synthetic.row(1), &[5.0, 7.0]);
    }

    #[test]
    fn target_below_count_rejected() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0]], &[0, 0]);
        let err = oversample(
            &d,
            &SmoteConfig {
                k: 1,
                targets: vec![1],
                seed: 0,
            },
        )
        .unwrap_err();
        assert_eq!(
            err,
            SmoteError::TargetBelowCount {
                class: 0,
                target: 1,
                current: 2
            }
        );
    }

    #[test]
    fn empty_class_with_request_rejected() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0]], &[0, 0]);
        let cfg = SmoteConfig {
            k: 1,
            targets: vec![2, 3],
            seed: 0,
        };
        assert!(matches!(
            oversample(&d, &cfg),
            Err(SmoteError::EmptyClass { class: 1, .. })
        ));
    }
}
