//! Autoencoder training with a reconstruction loss over mixed batches and a
//! same-class permutation penalty.

use std::path::Path;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::arch::AutoencoderArch;
use crate::nn::{
    adam_step, backward, checkpoint, forward, infer, mse_loss, AdamConfig, Gradients, Init, Mode, NetworkSpec, NnError,
    ParamStore,
};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

pub const ENCODER_FILE: &str = "encoder.dsmw";
pub const DECODER_FILE: &str = "decoder.dsmw";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("penalty batch mixes classes {0} and {1}")]
    MixedLabels(usize, usize),
    #[error("non-finite values at epoch {epoch}, batch {batch}: {source}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        #[source]
        source: NnError,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// How encoded same-class items are paired with the images they must decode to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Image `i` is scored against the decoding of embedding `i + 1` (cyclic).
    #[default]
    Shift,
    /// A fresh uniformly random permutation per batch.
    Random,
    /// No permutation; the penalty degenerates to a reconstruction loss.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: AutoencoderArch,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub penalty_weight: f64,
    pub pairing: Pairing,
    /// Minimum relative improvement of the epoch loss that resets patience.
    pub plateau_tolerance: f64,
    /// Epochs without such improvement before stopping; 0 disables the rule.
    pub plateau_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: AutoencoderArch::default(),
            adam: AdamConfig::default(),
            batch_size: 100,
            epochs: 100,
            penalty_weight: 1.0,
            pairing: Pairing::Shift,
            plateau_tolerance: 1e-4,
            plateau_patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::Config(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be positive".into()));
        }
        if !(self.penalty_weight >= 0.0) || !self.penalty_weight.is_finite() {
            return Err(TrainError::Config(format!(
                "penalty_weight must be >= 0, got {}",
                self.penalty_weight
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(TrainError::Config(format!("lr must be positive, got {}", self.adam.lr)));
        }
        if self.arch.latent_dim == 0 {
            return Err(TrainError::Config("latent_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub reconstruction: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Encoder and decoder with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder_spec: NetworkSpec,
    pub decoder_spec: NetworkSpec,
    pub encoder: ParamStore,
    pub decoder: ParamStore,
}

impl Autoencoder {
    pub fn new(arch: &AutoencoderArch, seed: u64) -> Result<Self, NnError> {
        let encoder_spec = arch.encoder_spec()?;
        let decoder_spec = arch.decoder_spec()?;
        let encoder = ParamStore::init(&encoder_spec, Init::default(), &mut rng::stream(seed, "init/encoder"))?;
        let decoder = ParamStore::init(&decoder_spec, Init::default(), &mut rng::stream(seed, "init/decoder"))?;
        Self::from_parts(encoder_spec, encoder, decoder_spec, decoder)
    }

    pub fn from_parts(
        encoder_spec: NetworkSpec,
        encoder: ParamStore,
        decoder_spec: NetworkSpec,
        decoder: ParamStore,
    ) -> Result<Self, NnError> {
        encoder.check_matches(&encoder_spec)?;
        decoder.check_matches(&decoder_spec)?;
        let code = encoder_spec.output_shape()?;
        if code != decoder_spec.input_shape {
            return Err(NnError::Mismatch(format!(
                "encoder emits {code:?} but decoder expects {:?}",
                decoder_spec.input_shape
            )));
        }
        if decoder_spec.output_shape()? != encoder_spec.input_shape {
            return Err(NnError::Mismatch("decoder output does not match encoder input".into()));
        }
        Ok(Self {
            encoder_spec,
            decoder_spec,
            encoder,
            decoder,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder_spec.input_shape.iter().product()
    }

    /// Eval-mode encoding.
    pub fn encode(&self, images: &Tensor) -> Result<Tensor, NnError> {
        infer(&self.encoder_spec, &self.encoder, images)
    }

    /// Eval-mode decoding.
    pub fn decode(&self, codes: &Tensor) -> Result<Tensor, NnError> {
        infer(&self.decoder_spec, &self.decoder, codes)
    }

    pub fn save(&self, dir: &Path) -> Result<(), NnError> {
        std::fs::create_dir_all(dir)?;
        checkpoint::save_params(&self.encoder, &dir.join(ENCODER_FILE))?;
        checkpoint::save_params(&self.decoder, &dir.join(DECODER_FILE))
    }

    pub fn load(arch: &AutoencoderArch, dir: &Path) -> Result<Self, NnError> {
        let encoder_spec = arch.encoder_spec()?;
        let decoder_spec = arch.decoder_spec()?;
        let encoder = checkpoint::load_params(&encoder_spec, &dir.join(ENCODER_FILE))?;
        let decoder = checkpoint::load_params(&decoder_spec, &dir.join(DECODER_FILE))?;
        Self::from_parts(encoder_spec, encoder, decoder_spec, decoder)
    }
}

/// Loss and gradients of one training objective.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f32,
    pub encoder: Gradients,
    pub decoder: Gradients,
}

/// Runs `decode(select(encode(batch), perm))` against `batch` in train mode and
/// backpropagates through both networks. Embedding `perm[i]` is decoded in
/// slot `i`.
fn permuted_step(ae: &mut Autoencoder, batch: &Tensor, perm: Option<&[usize]>) -> Result<StepOutput, NnError> {
    let (codes, enc_cache) = forward(&ae.encoder_spec, &mut ae.encoder, batch, Mode::Train)?;
    let paired = match perm {
        Some(p) => codes.select(p),
        None => codes,
    };
    let (decoded, dec_cache) = forward(&ae.decoder_spec, &mut ae.decoder, &paired, Mode::Train)?;
    let (loss, grad) = mse_loss(&decoded, batch)?;
    let (dec_grads, grad_paired) = backward(&ae.decoder_spec, &ae.decoder, &dec_cache, &grad)?;
    let grad_codes = match perm {
        Some(p) => {
            let mut g = Tensor::zeros(grad_paired.shape());
            for (slot, &src) in p.iter().enumerate() {
                for (a, &b) in g.sample_mut(src).iter_mut().zip(grad_paired.sample(slot)) {
                    *a += b;
                }
            }
            g
        }
        None => grad_paired,
    };
    let (enc_grads, _) = backward(&ae.encoder_spec, &ae.encoder, &enc_cache, &grad_codes)?;
    Ok(StepOutput {
        loss,
        encoder: enc_grads,
        decoder: dec_grads,
    })
}

/// Reconstruction MSE of a mixed-class batch.
pub fn reconstruction_step(ae: &mut Autoencoder, batch: &Tensor) -> Result<StepOutput, NnError> {
    permuted_step(ae, batch, None)
}

/// Permutation penalty on a single-class batch: every image is compared with
/// the decoding of a same-class peer's embedding.
pub fn penalty_step(
    ae: &mut Autoencoder,
    class_batch: &Tensor,
    labels: &[usize],
    pairing: Pairing,
    rng: &mut Rng,
) -> Result<StepOutput, TrainError> {
    let n = class_batch.batch();
    if n < 2 || labels.len() != n {
        return Err(TrainError::Config(format!(
            "penalty needs a batch of at least 2 with one label each, got {n} images and {} labels",
            labels.len()
        )));
    }
    if let Some(&other) = labels.iter().find(|&&l| l != labels[0]) {
        return Err(TrainError::MixedLabels(labels[0], other));
    }
    let perm: Vec<usize> = match pairing {
        Pairing::Shift => (0..n).map(|i| (i + 1) % n).collect(),
        Pairing::Identity => (0..n).collect(),
        Pairing::Random => {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        }
    };
    Ok(permuted_step(ae, class_batch, Some(&perm))?)
}

/// Draws same-class penalty batches: a class uniformly among those present,
/// then `batch_size` of its members, with replacement only when the class
/// is smaller than the batch.
#[derive(Debug, Clone)]
pub struct PenaltySampler {
    by_class: Vec<Vec<usize>>,
    batch_size: usize,
    rng: Rng,
}

impl PenaltySampler {
    pub fn new(labels: &[usize], batch_size: usize, rng: Rng) -> Self {
        let classes = labels.iter().max().map_or(0, |&m| m + 1);
        let by_class = (0..classes)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect::<Vec<_>>())
            .filter(|m| !m.is_empty())
            .collect();
        Self {
            by_class,
            batch_size,
            rng,
        }
    }

    /// Indices of one same-class batch.
    pub fn draw(&mut self) -> Vec<usize> {
        let members = self.by_class.choose(&mut self.rng).expect("at least one class");
        if members.len() >= self.batch_size {
            index::sample(&mut self.rng, members.len(), self.batch_size)
                .into_iter()
                .map(|k| members[k])
                .collect()
        } else {
            (0..self.batch_size)
                .map(|_| members[self.rng.random_range(0..members.len())])
                .collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Autoencoder,
    pub history: Vec<LossRecord>,
    /// True when the plateau rule ended training before `epochs`.
    pub plateaued: bool,
}

/// Trains a fresh autoencoder built from `cfg.arch`. `images` are normalised
/// `[N, C, S, S]` inputs, `labels` their classes.
pub fn train(images: &Tensor, labels: &[usize], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let model = Autoencoder::new(&cfg.arch, cfg.seed)?;
    train_model(model, images, labels, cfg)
}

/// Continues training `model`.
pub fn train_model(
    mut model: Autoencoder,
    images: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let n = images.batch();
    if n != labels.len() || n < 2 {
        return Err(TrainError::Config(format!(
            "need at least 2 images with one label each, got {n} images and {} labels",
            labels.len()
        )));
    }
    let mut sampler = PenaltySampler::new(labels, cfg.batch_size, rng::stream(cfg.seed, "train/penalty"));

    let mut order_rng = rng::stream(cfg.seed, "train/order");
    let weight = cfg.penalty_weight as f32;
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let (mut best, mut stale, mut plateaued) = (f64::INFINITY, 0, false);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut rec_sum, mut pen_sum, mut tot_sum, mut batches) = (0.0f64, 0.0f64, 0.0f64, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            // A lone trailing sample cannot carry batch statistics.
            if chunk.len() < 2 {
                continue;
            }
            let ctx = |source| TrainError::NonFinite {
                epoch,
                batch: b,
                source,
            };
            let batch = images.select(chunk);
            let rec = reconstruction_step(&mut model, &batch).map_err(ctx)?;
            let (mut enc_grads, mut dec_grads) = (rec.encoder, rec.decoder);
            let mut pen_loss = 0.0f32;
            if weight > 0.0 {
                let picks = sampler.draw();
                let class_batch = images.select(&picks);
                let class_labels: Vec<usize> = picks.iter().map(|&i| labels[i]).collect();
                let pen = match penalty_step(&mut model, &class_batch, &class_labels, cfg.pairing, &mut sampler.rng) {
                    Err(TrainError::Nn(e)) => return Err(ctx(e)),
                    other => other?,
                };
                enc_grads.add_scaled(&pen.encoder, weight);
                dec_grads.add_scaled(&pen.decoder, weight);
                pen_loss = pen.loss;
            }
            let total = rec.loss + weight * pen_loss;
            if !total.is_finite() {
                return Err(ctx(NnError::NonFinite(format!("total loss {total}"))));
            }
            adam_step(&mut model.encoder, &enc_grads, &cfg.adam).map_err(ctx)?;
            adam_step(&mut model.decoder, &dec_grads, &cfg.adam).map_err(ctx)?;
            rec_sum += rec.loss as f64;
            pen_sum += pen_loss as f64;
            tot_sum += total as f64;
            batches += 1;
        }
        let m = batches.max(1) as f64;
        let record = LossRecord {
            epoch,
            reconstruction: rec_sum / m,
            penalty: pen_sum / m,
            total: tot_sum / m,
        };
        log::info!(
            "epoch {epoch}: reconstruction {:.5} penalty {:.5} total {:.5}",
            record.reconstruction,
            record.penalty,
            record.total
        );
        let total = record.total;
        history.push(record);
        if cfg.plateau_patience > 0 {
            if total < best * (1.0 - cfg.plateau_tolerance) {
                best = total;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.plateau_patience {
                    plateaued = true;
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        plateaued,
    })
}
