use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::arch::classifier_spec;
use crate::nn::{
    adam_step, backward, cross_entropy, forward, infer, AdamConfig, Init, Mode, NetworkSpec, NnError, ParamStore,
};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 15,
            batch_size: 64,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub spec: NetworkSpec,
    pub params: ParamStore,
}

impl Classifier {
    pub fn logits(&self, images: &Tensor) -> Result<Tensor, NnError> {
        let mut out = Vec::new();
        let n = images.batch();
        for start in (0..n).step_by(256) {
            let idx: Vec<usize> = (start..(start + 256).min(n)).collect();
            out.extend_from_slice(infer(&self.spec, &self.params, &images.select(&idx))?.data());
        }
        let classes = self.spec.output_shape()?[0];
        Ok(Tensor::new(vec![n, classes], out)?)
    }

    /// Arg-max class per image, ties to the lower id.
    pub fn predict(&self, images: &Tensor) -> Result<Vec<usize>, NnError> {
        let logits = self.logits(images)?;
        Ok((0..logits.batch())
            .map(|i| {
                let row = logits.sample(i);
                (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best })
            })
            .collect())
    }
}

/// Trains the desk CNN with softmax cross-entropy and Adam on normalised
/// `[N, C, S, S]` images.
pub fn train_classifier(
    images: &Tensor,
    labels: &[usize],
    classes: usize,
    cfg: &ClassifierConfig,
) -> Result<Classifier, NnError> {
    let shape = images.shape();
    if shape.len() != 4 || shape[2] != shape[3] || shape[0] != labels.len() || shape[0] == 0 {
        return Err(NnError::Mismatch(format!(
            "{:?} images for {} labels",
            shape,
            labels.len()
        )));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 || classes == 0 {
        return Err(NnError::Mismatch(
            "classifier needs positive batch size, width and class count".into(),
        ));
    }
    let spec = classifier_spec(shape[1], shape[2], classes, cfg.hidden)?;
    let mut params = ParamStore::init(&spec, Init::Kaiming, &mut rng::stream(cfg.seed, "classifier/init"))?;
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut order_rng = rng::stream(cfg.seed, "classifier/order");
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = images.select(chunk);
            let targets: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (logits, cache) = forward(&spec, &mut params, &batch, Mode::Train)?;
            let (loss, grad) = cross_entropy(&logits, &targets)?;
            let (grads, _) = backward(&spec, &params, &cache, &grad)?;
            adam_step(&mut params, &grads, &cfg.adam)?;
            total += loss as f64 * chunk.len() as f64;
        }
        log::debug!("classifier epoch {epoch}: loss {:.4}", total / labels.len() as f64);
    }
    Ok(Classifier { spec, params })
}
