//! Central finite-difference verification of [`backward`](super::backward).

use rand::Rng as _;

use super::arch::{AutoencoderArch, LEAKY_SLOPE};
use super::{backward, forward, mse_loss, Init, LayerSpec, Mode, NetworkSpec, NnError, ParamStore};
use crate::rng;
use crate::tensor::{Scalar, Tensor};

pub const MAX_CHECKED_PARAMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index where the worst error occurred.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Probes where a perturbed pass crossed a rectifier or max-pool kink.
    /// Central differences are not a valid oracle there, so they are counted
    /// but not compared.
    pub skipped_nonsmooth: usize,
}

/// Compares analytic parameter gradients with the five-point central
/// difference `(8 (L(p+e) - L(p-e)) - (L(p+2e) - L(p-2e))) / 12 e`, in train
/// mode. Its truncation error is fourth order in `e`. The relative error
/// denominator is `max(|a|, |n|, 1e-8)`. Probes whose perturbed passes land
/// on a different side of a kink than the unperturbed pass are skipped.
pub fn grad_check<T, F>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    input: &Tensor<T>,
    loss_fn: F,
    epsilon: f64,
) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<(T, Tensor<T>), NnError>,
{
    let total = params.num_params();
    if total > MAX_CHECKED_PARAMS {
        return Err(NnError::TooLarge {
            max: MAX_CHECKED_PARAMS,
            found: total,
        });
    }
    let mut work = params.clone();
    let (out, cache) = forward(spec, &mut work, input, Mode::Train)?;
    let (_, grad_out) = loss_fn(&out)?;
    let (grads, _) = backward(spec, params, &cache, &grad_out)?;
    let base_pattern = cache.branch_pattern();

    let eval = |probe: &ParamStore<T>| -> Result<(f64, bool), NnError> {
        let mut scratch = probe.clone();
        let (out, cache) = forward(spec, &mut scratch, input, Mode::Train)?;
        Ok((loss_fn(&out)?.0.f64(), cache.branch_pattern() == base_pattern))
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        skipped_nonsmooth: 0,
    };
    let flat: Vec<&Tensor<T>> = grads.iter().collect();
    let mut probe = params.clone();
    let slots: Vec<(usize, usize)> = params
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(l, lp)| (0..lp.params.len()).map(move |k| (l, k)))
        .collect();
    for (slot, &(l, k)) in slots.iter().enumerate() {
        let len = params.layers()[l].params[k].value.len();
        for j in 0..len {
            let original = params.layers()[l].params[k].value.data()[j];
            let mut losses = [0.0f64; 4];
            let mut smooth = true;
            for (slot_loss, step) in losses.iter_mut().zip([2.0, 1.0, -1.0, -2.0]) {
                probe.layers_mut()[l].params[k].value.data_mut()[j] = T::of(original.f64() + step * epsilon);
                let (loss, same_side) = eval(&probe)?;
                *slot_loss = loss;
                smooth &= same_side;
            }
            probe.layers_mut()[l].params[k].value.data_mut()[j] = original;
            if !smooth {
                report.skipped_nonsmooth += 1;
                continue;
            }

            let [p2, p1, m1, m2] = losses;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * epsilon);
            let analytic = flat[slot].data()[j].f64();
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel;
                report.worst = Some((params.layers()[l].params[k].name.clone(), j));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Small networks that between them contain every layer kind, plus both
/// autoencoder halves at a toy width.
pub fn toy_networks() -> Result<Vec<(&'static str, NetworkSpec)>, NnError> {
    let conv = |i, o, k, s, p, bias| LayerSpec::Conv2d {
        in_channels: i,
        out_channels: o,
        kernel: k,
        stride: s,
        padding: p,
        bias,
    };
    let linear = |i, o| LayerSpec::Linear {
        in_features: i,
        out_features: o,
    };
    let arch = AutoencoderArch {
        widths: vec![4; 4],
        latent_dim: 8,
        ..AutoencoderArch::default()
    };
    Ok(vec![
        (
            "conv2d",
            NetworkSpec::new(vec![2, 5, 5], vec![conv(2, 3, 3, 1, 1, true)])?,
        ),
        (
            "conv2d_transpose",
            NetworkSpec::new(
                vec![2, 3, 3],
                vec![LayerSpec::Conv2dTranspose {
                    in_channels: 2,
                    out_channels: 3,
                    kernel: 4,
                    stride: 2,
                    padding: 1,
                    bias: true,
                }],
            )?,
        ),
        (
            "batchnorm2d",
            NetworkSpec::new(
                vec![2, 6, 6],
                vec![conv(2, 3, 4, 2, 1, false), LayerSpec::Batchnorm2d { channels: 3 }],
            )?,
        ),
        (
            "linear_tanh",
            NetworkSpec::new(vec![5], vec![linear(5, 4), LayerSpec::Tanh])?,
        ),
        (
            "leaky_relu",
            NetworkSpec::new(
                vec![5],
                vec![
                    linear(5, 4),
                    LayerSpec::LeakyRelu {
                        negative_slope: LEAKY_SLOPE,
                    },
                ],
            )?,
        ),
        ("relu", NetworkSpec::new(vec![5], vec![linear(5, 4), LayerSpec::Relu])?),
        (
            "max_pool2d",
            NetworkSpec::new(
                vec![1, 4, 4],
                vec![conv(1, 2, 3, 1, 1, true), LayerSpec::MaxPool2d { kernel: 2 }],
            )?,
        ),
        (
            "flatten_unflatten",
            NetworkSpec::new(
                vec![2, 2, 2],
                vec![
                    LayerSpec::Flatten,
                    linear(8, 8),
                    LayerSpec::Unflatten {
                        channels: 2,
                        height: 2,
                        width: 2,
                    },
                ],
            )?,
        ),
        ("encoder", arch.encoder_spec()?),
        ("decoder", arch.decoder_spec()?),
    ])
}

/// Gradient check of `spec` on a random batch against a random MSE target,
/// with weights drawn from N(0, `std`) under `seed`.
pub fn check_random<T: Scalar>(
    spec: &NetworkSpec,
    seed: u64,
    batch: usize,
    std: f64,
    epsilon: f64,
) -> Result<GradCheckReport, NnError> {
    let mut r = rng::stream(seed, "gradcheck");
    let params: ParamStore<T> = ParamStore::init(spec, Init::Normal { std }, &mut r)?;
    let mut shape = vec![batch];
    shape.extend_from_slice(&spec.input_shape);
    let n: usize = shape.iter().product();
    let input = Tensor::new(shape, (0..n).map(|_| T::of(r.random_range(-1.0..1.0))).collect())?;
    let mut out_shape = vec![batch];
    out_shape.extend(spec.output_shape()?);
    let m: usize = out_shape.iter().product();
    let target = Tensor::new(out_shape, (0..m).map(|_| T::of(r.random_range(-1.0..1.0))).collect())?;
    grad_check(spec, &params, &input, |out| mse_loss(out, &target), epsilon)
}
