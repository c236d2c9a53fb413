//! Trainable parameters, batch-norm running statistics and Adam state.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{LayerSpec, NetworkSpec, NnError};
use crate::tensor::{Scalar, Tensor};

/// A trainable tensor together with its Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub(crate) first_moment: Tensor<T>,
    pub(crate) second_moment: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    fn new(name: String, value: Tensor<T>) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Self {
            name,
            value,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn first_moment(&self) -> &Tensor<T> {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Tensor<T> {
        &self.second_moment
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams<T = f32> {
    pub params: Vec<Param<T>>,
    pub running: Option<RunningStats<T>>,
}

/// Weight initialisation for conv, transposed conv and linear layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Centered normal with the given standard deviation.
    Normal { std: f64 },
    /// He normal, std = sqrt(2 / fan_in).
    Kaiming,
}

impl Default for Init {
    fn default() -> Self {
        Init::Normal { std: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T = f32> {
    layers: Vec<LayerParams<T>>,
    step: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, init: Init, rng: &mut R) -> Result<Self, NnError> {
        spec.shapes()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let mut lp = LayerParams::default();
            let weights = |shape: Vec<usize>, fan_in: usize, rng: &mut R| {
                let std = match init {
                    Init::Normal { std } => std,
                    Init::Kaiming => (2.0 / fan_in as f64).sqrt(),
                };
                let dist = Normal::new(0.0, std).expect("finite std");
                let n = shape.iter().product();
                let data = (0..n).map(|_| T::of(dist.sample(rng))).collect();
                Tensor::new(shape, data).expect("shape matches data")
            };
            match *layer {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    bias,
                    ..
                } => {
                    let w = weights(
                        vec![out_channels, in_channels, kernel, kernel],
                        in_channels * kernel * kernel,
                        rng,
                    );
                    lp.params.push(Param::new(format!("{i}.weight"), w));
                    if bias {
                        lp.params
                            .push(Param::new(format!("{i}.bias"), Tensor::zeros(&[out_channels])));
                    }
                }
                LayerSpec::Conv2dTranspose {
                    in_channels,
                    out_channels,
                    kernel,
                    bias,
                    ..
                } => {
                    let w = weights(
                        vec![in_channels, out_channels, kernel, kernel],
                        in_channels * kernel * kernel,
                        rng,
                    );
                    lp.params.push(Param::new(format!("{i}.weight"), w));
                    if bias {
                        lp.params
                            .push(Param::new(format!("{i}.bias"), Tensor::zeros(&[out_channels])));
                    }
                }
                LayerSpec::Linear {
                    in_features,
                    out_features,
                } => {
                    let w = weights(vec![out_features, in_features], in_features, rng);
                    lp.params.push(Param::new(format!("{i}.weight"), w));
                    lp.params
                        .push(Param::new(format!("{i}.bias"), Tensor::zeros(&[out_features])));
                }
                LayerSpec::Batchnorm2d { channels } => {
                    lp.params
                        .push(Param::new(format!("{i}.gamma"), Tensor::full(&[channels], T::one())));
                    lp.params
                        .push(Param::new(format!("{i}.beta"), Tensor::zeros(&[channels])));
                    lp.running = Some(RunningStats {
                        mean: vec![T::zero(); channels],
                        var: vec![T::one(); channels],
                    });
                }
                _ => {}
            }
            layers.push(lp);
        }
        Ok(Self { layers, step: 0 })
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.layers
    }

    /// Number of Adam steps applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn advance_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.iter().find(|p| p.name == name)
    }

    /// Checks that the store was built for `spec` (same layer count and parameter shapes).
    pub fn check_matches(&self, spec: &NetworkSpec) -> Result<(), NnError> {
        if self.layers.len() != spec.layers.len() {
            return Err(NnError::Params(format!(
                "{} parameter layers for {} network layers",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    params: l
                        .params
                        .iter()
                        .map(|p| Param {
                            name: p.name.clone(),
                            value: p.value.cast(),
                            first_moment: p.first_moment.cast(),
                            second_moment: p.second_moment.cast(),
                        })
                        .collect(),
                    running: l.running.as_ref().map(|r| RunningStats {
                        mean: r.mean.iter().map(|v| U::of(v.f64())).collect(),
                        var: r.var.iter().map(|v| U::of(v.f64())).collect(),
                    }),
                })
                .collect(),
            step: self.step,
        }
    }
}

/// Gradients laid out exactly like the parameters of a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub layers: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        Self {
            layers: params
                .layers()
                .iter()
                .map(|l| l.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect())
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten()
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, other: &Self, weight: T) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().flatten().zip(other.layers.iter().flatten()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += weight * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(Tensor::is_finite)
    }

    /// Sum of squared entries, handy for "is anything flowing" checks.
    pub fn squared_norm(&self) -> f64 {
        self.iter()
            .flat_map(|t| t.data().iter())
            .map(|v| v.f64() * v.f64())
            .sum()
    }
}
