//! Forward and backward passes over a [`NetworkSpec`].
//!
//! Activations are `[batch, ...]` tensors. Convolutions lower to GEMM through
//! im2col, one sample at a time, so the reduction order is fixed and results
//! are bit-reproducible.

use super::{Gradients, LayerSpec, NetworkSpec, NnError, ParamStore, RunningStats};
use crate::tensor::{gemm, Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for batch norm; running statistics are updated.
    Train,
    /// Running statistics for batch norm; nothing is mutated.
    Eval,
}

#[derive(Debug, Clone)]
enum LayerCache<T> {
    Conv { cols: Vec<T>, in_shape: Vec<usize> },
    ConvTranspose { input: Tensor<T> },
    BatchNorm { xhat: Vec<T>, inv_std: Vec<T>, train: bool },
    Rectifier { input: Tensor<T> },
    Tanh { output: Tensor<T> },
    Reshape { in_shape: Vec<usize> },
    Linear { input: Tensor<T> },
    MaxPool { argmax: Vec<usize>, in_shape: Vec<usize> },
}

/// Per-layer intermediates saved by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    layers: Vec<LayerCache<T>>,
    mode: Mode,
}

impl<T> ForwardCache<T> {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Which side of every kink the pass landed on: rectifier input signs and
    /// max-pool winners. Two passes with equal patterns lie in the same
    /// piecewise-smooth region.
    pub(crate) fn branch_pattern(&self) -> Vec<usize>
    where
        T: Scalar,
    {
        let mut pattern = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerCache::Rectifier { input } => {
                    pattern.extend(input.data().iter().map(|&v| (v > T::zero()) as usize));
                }
                LayerCache::MaxPool { argmax, .. } => pattern.extend_from_slice(argmax),
                _ => {}
            }
        }
        pattern
    }
}

struct ConvGeom {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source pixel for output position `o` and kernel offset `k`, if inside the image.
    #[inline]
    fn src(&self, o: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }

    fn im2col<T: Scalar>(&self, image: &[T], cols: &mut [T]) {
        let (k, ow, p) = (self.kernel, self.out_w, self.col_cols());
        for c in 0..self.channels {
            let plane = &image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let dst = &mut row[oh * ow..(oh + 1) * ow];
                        match self.src(oh, ki, self.height) {
                            None => dst.fill(T::zero()),
                            Some(ih) => {
                                for (x, d) in dst.iter_mut().enumerate() {
                                    *d = match self.src(x, kj, self.width) {
                                        Some(iw) => plane[ih * self.width + iw],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`]: accumulates columns back onto the image.
    fn col2im<T: Scalar>(&self, cols: &[T], image: &mut [T]) {
        let (k, ow, p) = (self.kernel, self.out_w, self.col_cols());
        for c in 0..self.channels {
            let plane = &mut image[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &cols[((c * k + ki) * k + kj) * p..][..p];
                    for oh in 0..self.out_h {
                        let Some(ih) = self.src(oh, ki, self.height) else {
                            continue;
                        };
                        for (x, &v) in row[oh * ow..(oh + 1) * ow].iter().enumerate() {
                            if let Some(iw) = self.src(x, kj, self.width) {
                                plane[ih * self.width + iw] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_input<T: Scalar>(spec: &NetworkSpec, input: &Tensor<T>) -> Result<Vec<Vec<usize>>, NnError> {
    let shapes = spec.shapes()?;
    if input.shape().len() < 2 || input.shape()[1..] != spec.input_shape[..] {
        return Err(NnError::InputShape {
            expected: spec.input_shape.clone(),
            found: input.shape().get(1..).unwrap_or(&[]).to_vec(),
        });
    }
    Ok(shapes)
}

fn check_params<T: Scalar>(spec: &NetworkSpec, params: &ParamStore<T>) -> Result<(), NnError> {
    params.check_matches(spec)?;
    for (i, (layer, lp)) in spec.layers.iter().zip(params.layers()).enumerate() {
        let expected = match layer {
            LayerSpec::Conv2d { bias, .. } | LayerSpec::Conv2dTranspose { bias, .. } => 1 + *bias as usize,
            LayerSpec::Linear { .. } | LayerSpec::Batchnorm2d { .. } => 2,
            _ => 0,
        };
        if lp.params.len() != expected {
            return Err(NnError::Params(format!(
                "layer {i} ({}) has {} tensors, expected {expected}",
                layer.kind(),
                lp.params.len()
            )));
        }
    }
    Ok(())
}

fn with_batch(batch: usize, sample: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(sample.len() + 1);
    s.push(batch);
    s.extend_from_slice(sample);
    s
}

/// Runs the network. In [`Mode::Train`] batch-norm running statistics are
/// updated in `params`; in [`Mode::Eval`] `params` is left untouched.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &mut ParamStore<T>,
    input: &Tensor<T>,
    mode: Mode,
) -> Result<(Tensor<T>, ForwardCache<T>), NnError> {
    let (out, cache) = run(spec, params, input, mode, true)?;
    Ok((out, cache.expect("caching requested")))
}

/// Eval-mode forward pass without keeping a cache.
pub fn infer<T: Scalar>(spec: &NetworkSpec, params: &ParamStore<T>, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let mut view = ParamView::Shared(params);
    run_inner(spec, &mut view, input, Mode::Eval, false).map(|(t, _)| t)
}

enum ParamView<'a, T> {
    Shared(&'a ParamStore<T>),
    Owned(&'a mut ParamStore<T>),
}

impl<T> ParamView<'_, T> {
    fn store(&self) -> &ParamStore<T> {
        match self {
            ParamView::Shared(p) => p,
            ParamView::Owned(p) => p,
        }
    }
}

fn run<T: Scalar>(
    spec: &NetworkSpec,
    params: &mut ParamStore<T>,
    input: &Tensor<T>,
    mode: Mode,
    keep: bool,
) -> Result<(Tensor<T>, Option<ForwardCache<T>>), NnError> {
    let mut view = ParamView::Owned(params);
    run_inner(spec, &mut view, input, mode, keep)
}

fn run_inner<T: Scalar>(
    spec: &NetworkSpec,
    params: &mut ParamView<'_, T>,
    input: &Tensor<T>,
    mode: Mode,
    keep: bool,
) -> Result<(Tensor<T>, Option<ForwardCache<T>>), NnError> {
    let shapes = check_input(spec, input)?;
    check_params(spec, params.store())?;
    let batch = input.batch();
    let mut caches = Vec::with_capacity(if keep { spec.layers.len() } else { 0 });
    let mut x = input.clone();
    for (i, layer) in spec.layers.iter().enumerate() {
        let out_shape = with_batch(batch, &shapes[i + 1]);
        let (y, cache) = match *layer {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let lp = &params.store().layers()[i];
                let geom = ConvGeom {
                    channels: shapes[i][0],
                    height: shapes[i][1],
                    width: shapes[i][2],
                    kernel,
                    stride,
                    padding,
                    out_h: shapes[i + 1][1],
                    out_w: shapes[i + 1][2],
                };
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let mut cols = vec![T::zero(); batch * rows * p];
                let mut y = Tensor::zeros(&out_shape);
                let w = lp.params[0].value.data();
                for b in 0..batch {
                    let cb = &mut cols[b * rows * p..(b + 1) * rows * p];
                    geom.im2col(x.sample(b), cb);
                    gemm(
                        false,
                        false,
                        out_channels,
                        p,
                        rows,
                        T::one(),
                        w,
                        cb,
                        T::zero(),
                        y.sample_mut(b),
                    );
                    if let Some(bias) = lp.params.get(1) {
                        add_channel_bias(y.sample_mut(b), bias.value.data(), p);
                    }
                }
                let cache = keep.then(|| LayerCache::Conv {
                    cols,
                    in_shape: x.shape().to_vec(),
                });
                (y, cache)
            }
            LayerSpec::Conv2dTranspose {
                in_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let lp = &params.store().layers()[i];
                // The adjoint convolution runs from output space back to input space.
                let geom = ConvGeom {
                    channels: shapes[i + 1][0],
                    height: shapes[i + 1][1],
                    width: shapes[i + 1][2],
                    kernel,
                    stride,
                    padding,
                    out_h: shapes[i][1],
                    out_w: shapes[i][2],
                };
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let mut cols = vec![T::zero(); rows * p];
                let mut y = Tensor::zeros(&out_shape);
                let w = lp.params[0].value.data();
                let plane = shapes[i + 1][1] * shapes[i + 1][2];
                for b in 0..batch {
                    gemm(
                        true,
                        false,
                        rows,
                        p,
                        in_channels,
                        T::one(),
                        w,
                        x.sample(b),
                        T::zero(),
                        &mut cols,
                    );
                    geom.col2im(&cols, y.sample_mut(b));
                    if let Some(bias) = lp.params.get(1) {
                        add_channel_bias(y.sample_mut(b), bias.value.data(), plane);
                    }
                }
                (y, keep.then(|| LayerCache::ConvTranspose { input: x.clone() }))
            }
            LayerSpec::Batchnorm2d { channels } => {
                let train = mode == Mode::Train;
                let plane = shapes[i][1] * shapes[i][2];
                let count = batch * plane;
                let (gamma, beta) = {
                    let lp = &params.store().layers()[i];
                    (lp.params[0].value.data().to_vec(), lp.params[1].value.data().to_vec())
                };
                let mut y = Tensor::zeros(&out_shape);
                let mut xhat = if keep { vec![T::zero(); x.len()] } else { Vec::new() };
                let mut inv_stds = Vec::with_capacity(channels);
                let mut batch_stats = Vec::with_capacity(channels);
                for c in 0..channels {
                    let (mean, var) = if train {
                        let mut sum = 0.0;
                        for b in 0..batch {
                            sum += x.sample(b)[c * plane..(c + 1) * plane]
                                .iter()
                                .map(|v| v.f64())
                                .sum::<f64>();
                        }
                        let mean = sum / count as f64;
                        let mut sq = 0.0;
                        for b in 0..batch {
                            sq += x.sample(b)[c * plane..(c + 1) * plane]
                                .iter()
                                .map(|v| (v.f64() - mean).powi(2))
                                .sum::<f64>();
                        }
                        let var = sq / count as f64;
                        batch_stats.push((mean, var));
                        (mean, var)
                    } else {
                        let r = params.store().layers()[i]
                            .running
                            .as_ref()
                            .ok_or_else(|| NnError::Params(format!("layer {i} lacks running statistics")))?;
                        (r.mean[c].f64(), r.var[c].f64())
                    };
                    let inv_std = 1.0 / (var + BN_EPS).sqrt();
                    inv_stds.push(T::of(inv_std));
                    for b in 0..batch {
                        let off = b * channels * plane + c * plane;
                        for j in off..off + plane {
                            let h = T::of((x.data()[j].f64() - mean) * inv_std);
                            if keep {
                                xhat[j] = h;
                            }
                            y.data_mut()[j] = gamma[c] * h + beta[c];
                        }
                    }
                }
                if train {
                    if let ParamView::Owned(store) = params {
                        let running = store.layers_mut()[i].running.get_or_insert_with(|| RunningStats {
                            mean: vec![T::zero(); channels],
                            var: vec![T::one(); channels],
                        });
                        for (c, &(mean, var)) in batch_stats.iter().enumerate() {
                            let unbiased = if count > 1 {
                                var * count as f64 / (count - 1) as f64
                            } else {
                                var
                            };
                            running.mean[c] = T::of((1.0 - BN_MOMENTUM) * running.mean[c].f64() + BN_MOMENTUM * mean);
                            running.var[c] = T::of((1.0 - BN_MOMENTUM) * running.var[c].f64() + BN_MOMENTUM * unbiased);
                        }
                    }
                }
                (
                    y,
                    keep.then(|| LayerCache::BatchNorm {
                        xhat,
                        inv_std: inv_stds,
                        train,
                    }),
                )
            }
            LayerSpec::LeakyRelu { negative_slope } => {
                let slope = T::of(negative_slope);
                let y = x.map(|v| if v > T::zero() { v } else { v * slope });
                (y, keep.then(|| LayerCache::Rectifier { input: x.clone() }))
            }
            LayerSpec::Relu => {
                let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
                (y, keep.then(|| LayerCache::Rectifier { input: x.clone() }))
            }
            LayerSpec::Tanh => {
                let y = x.map(T::tanh);
                let cache = keep.then(|| LayerCache::Tanh { output: y.clone() });
                (y, cache)
            }
            LayerSpec::Flatten | LayerSpec::Unflatten { .. } => {
                let in_shape = x.shape().to_vec();
                let y = x.clone().reshape(&out_shape)?;
                (y, keep.then_some(LayerCache::Reshape { in_shape }))
            }
            LayerSpec::Linear {
                in_features,
                out_features,
            } => {
                let lp = &params.store().layers()[i];
                let mut y = Tensor::zeros(&out_shape);
                gemm(
                    false,
                    true,
                    batch,
                    out_features,
                    in_features,
                    T::one(),
                    x.data(),
                    lp.params[0].value.data(),
                    T::zero(),
                    y.data_mut(),
                );
                let bias = lp.params[1].value.data();
                for b in 0..batch {
                    for (v, &bb) in y.sample_mut(b).iter_mut().zip(bias) {
                        *v += bb;
                    }
                }
                (y, keep.then(|| LayerCache::Linear { input: x.clone() }))
            }
            LayerSpec::MaxPool2d { kernel } => {
                let (c, h, w) = (shapes[i][0], shapes[i][1], shapes[i][2]);
                let (oh, ow) = (shapes[i + 1][1], shapes[i + 1][2]);
                let mut y = Tensor::zeros(&out_shape);
                let mut argmax = Vec::with_capacity(if keep { y.len() } else { 0 });
                let mut o = 0;
                for b in 0..batch {
                    for ch in 0..c {
                        let base = (b * c + ch) * h * w;
                        for r in 0..oh {
                            for q in 0..ow {
                                let mut best = base + r * kernel * w + q * kernel;
                                for di in 0..kernel {
                                    for dj in 0..kernel {
                                        let j = base + (r * kernel + di) * w + q * kernel + dj;
                                        if x.data()[j] > x.data()[best] {
                                            best = j;
                                        }
                                    }
                                }
                                y.data_mut()[o] = x.data()[best];
                                if keep {
                                    argmax.push(best);
                                }
                                o += 1;
                            }
                        }
                    }
                }
                let in_shape = x.shape().to_vec();
                (y, keep.then_some(LayerCache::MaxPool { argmax, in_shape }))
            }
        };
        if keep {
            caches.push(cache.expect("cache built when requested"));
        }
        x = y;
    }
    let cache = keep.then_some(ForwardCache { layers: caches, mode });
    Ok((x, cache))
}

fn add_channel_bias<T: Scalar>(sample: &mut [T], bias: &[T], plane: usize) {
    for (c, &bb) in bias.iter().enumerate() {
        for v in &mut sample[c * plane..(c + 1) * plane] {
            *v += bb;
        }
    }
}

fn channel_sums<T: Scalar>(grad: &Tensor<T>, channels: usize, plane: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); channels];
    for b in 0..grad.batch() {
        let s = grad.sample(b);
        for (c, acc) in sums.iter_mut().enumerate() {
            *acc += s[c * plane..(c + 1) * plane].iter().copied().sum::<T>();
        }
    }
    sums
}

/// Backpropagates `grad_output` through the network. Returns parameter
/// gradients and the gradient with respect to the input. `params` is read only.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParamStore<T>,
    cache: &ForwardCache<T>,
    grad_output: &Tensor<T>,
) -> Result<(Gradients<T>, Tensor<T>), NnError> {
    let shapes = spec.shapes()?;
    check_params(spec, params)?;
    if cache.layers.len() != spec.layers.len() {
        return Err(NnError::Cache(format!(
            "{} cached layers for {} network layers",
            cache.layers.len(),
            spec.layers.len()
        )));
    }
    let batch = grad_output.batch();
    if grad_output.shape()[1..] != shapes[spec.layers.len()][..] {
        return Err(NnError::Mismatch(format!(
            "grad_output per-sample shape {:?} differs from network output {:?}",
            &grad_output.shape()[1..],
            shapes[spec.layers.len()]
        )));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut g = grad_output.clone();
    for i in (0..spec.layers.len()).rev() {
        let layer = &spec.layers[i];
        let lp = &params.layers()[i];
        let in_shape = with_batch(batch, &shapes[i]);
        let mismatch = || NnError::Cache(format!("layer {i} ({}) has a foreign cache entry", layer.kind()));
        g = match (layer, &cache.layers[i]) {
            (
                &LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    ..
                },
                LayerCache::Conv { cols, in_shape: cached },
            ) => {
                if cached[..] != in_shape[..] {
                    return Err(mismatch());
                }
                let geom = ConvGeom {
                    channels: in_channels,
                    height: shapes[i][1],
                    width: shapes[i][2],
                    kernel,
                    stride,
                    padding,
                    out_h: shapes[i + 1][1],
                    out_w: shapes[i + 1][2],
                };
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let w = lp.params[0].value.data();
                let mut dx = Tensor::zeros(&in_shape);
                let mut dcols = vec![T::zero(); rows * p];
                let dw = grads.layers[i][0].data_mut();
                for b in 0..batch {
                    let cb = &cols[b * rows * p..(b + 1) * rows * p];
                    gemm(
                        false,
                        true,
                        out_channels,
                        rows,
                        p,
                        T::one(),
                        g.sample(b),
                        cb,
                        T::one(),
                        dw,
                    );
                    gemm(
                        true,
                        false,
                        rows,
                        p,
                        out_channels,
                        T::one(),
                        w,
                        g.sample(b),
                        T::zero(),
                        &mut dcols,
                    );
                    geom.col2im(&dcols, dx.sample_mut(b));
                }
                if lp.params.len() > 1 {
                    grads.layers[i][1] = Tensor::new(vec![out_channels], channel_sums(&g, out_channels, p))?;
                }
                dx
            }
            (
                &LayerSpec::Conv2dTranspose {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    ..
                },
                LayerCache::ConvTranspose { input },
            ) => {
                if input.shape() != &in_shape[..] {
                    return Err(mismatch());
                }
                let geom = ConvGeom {
                    channels: out_channels,
                    height: shapes[i + 1][1],
                    width: shapes[i + 1][2],
                    kernel,
                    stride,
                    padding,
                    out_h: shapes[i][1],
                    out_w: shapes[i][2],
                };
                let (rows, p) = (geom.col_rows(), geom.col_cols());
                let w = lp.params[0].value.data();
                let mut dx = Tensor::zeros(&in_shape);
                let mut dcols = vec![T::zero(); rows * p];
                let dw = grads.layers[i][0].data_mut();
                for b in 0..batch {
                    geom.im2col(g.sample(b), &mut dcols);
                    gemm(
                        false,
                        false,
                        in_channels,
                        p,
                        rows,
                        T::one(),
                        w,
                        &dcols,
                        T::zero(),
                        dx.sample_mut(b),
                    );
                    gemm(
                        false,
                        true,
                        in_channels,
                        rows,
                        p,
                        T::one(),
                        input.sample(b),
                        &dcols,
                        T::one(),
                        dw,
                    );
                }
                if lp.params.len() > 1 {
                    let plane = shapes[i + 1][1] * shapes[i + 1][2];
                    grads.layers[i][1] = Tensor::new(vec![out_channels], channel_sums(&g, out_channels, plane))?;
                }
                dx
            }
            (&LayerSpec::Batchnorm2d { channels }, LayerCache::BatchNorm { xhat, inv_std, train }) => {
                if xhat.len() != g.len() {
                    return Err(mismatch());
                }
                let plane = shapes[i][1] * shapes[i][2];
                let n = (batch * plane) as f64;
                let gamma = lp.params[0].value.data();
                let mut dx = Tensor::zeros(&in_shape);
                let mut dgamma = vec![T::zero(); channels];
                let mut dbeta = vec![T::zero(); channels];
                for c in 0..channels {
                    let idx = |b: usize| b * channels * plane + c * plane..b * channels * plane + (c + 1) * plane;
                    let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
                    for b in 0..batch {
                        for j in idx(b) {
                            let dy = g.data()[j].f64();
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat[j].f64();
                        }
                    }
                    dgamma[c] = T::of(sum_dy_xhat);
                    dbeta[c] = T::of(sum_dy);
                    let scale = gamma[c].f64() * inv_std[c].f64();
                    for b in 0..batch {
                        for j in idx(b) {
                            let dy = g.data()[j].f64();
                            dx.data_mut()[j] = T::of(if *train {
                                scale * (dy - sum_dy / n - xhat[j].f64() * sum_dy_xhat / n)
                            } else {
                                scale * dy
                            });
                        }
                    }
                }
                grads.layers[i][0] = Tensor::new(vec![channels], dgamma)?;
                grads.layers[i][1] = Tensor::new(vec![channels], dbeta)?;
                dx
            }
            (LayerSpec::LeakyRelu { negative_slope }, LayerCache::Rectifier { input }) => {
                let slope = T::of(*negative_slope);
                rectifier_grad(&g, input, slope, &in_shape).ok_or_else(mismatch)?
            }
            (LayerSpec::Relu, LayerCache::Rectifier { input }) => {
                rectifier_grad(&g, input, T::zero(), &in_shape).ok_or_else(mismatch)?
            }
            (LayerSpec::Tanh, LayerCache::Tanh { output }) => {
                if output.shape() != g.shape() {
                    return Err(mismatch());
                }
                let data = g
                    .data()
                    .iter()
                    .zip(output.data())
                    .map(|(&d, &y)| d * (T::one() - y * y))
                    .collect();
                Tensor::new(in_shape, data)?
            }
            (LayerSpec::Flatten | LayerSpec::Unflatten { .. }, LayerCache::Reshape { in_shape: cached }) => {
                if cached[..] != in_shape[..] {
                    return Err(mismatch());
                }
                g.reshape(&in_shape)?
            }
            (
                &LayerSpec::Linear {
                    in_features,
                    out_features,
                },
                LayerCache::Linear { input },
            ) => {
                if input.shape() != &in_shape[..] {
                    return Err(mismatch());
                }
                gemm(
                    true,
                    false,
                    out_features,
                    in_features,
                    batch,
                    T::one(),
                    g.data(),
                    input.data(),
                    T::zero(),
                    grads.layers[i][0].data_mut(),
                );
                let mut db = vec![T::zero(); out_features];
                for b in 0..batch {
                    for (acc, &v) in db.iter_mut().zip(g.sample(b)) {
                        *acc += v;
                    }
                }
                grads.layers[i][1] = Tensor::new(vec![out_features], db)?;
                let mut dx = Tensor::zeros(&in_shape);
                gemm(
                    false,
                    false,
                    batch,
                    in_features,
                    out_features,
                    T::one(),
                    g.data(),
                    lp.params[0].value.data(),
                    T::zero(),
                    dx.data_mut(),
                );
                dx
            }
            (
                LayerSpec::MaxPool2d { .. },
                LayerCache::MaxPool {
                    argmax,
                    in_shape: cached,
                },
            ) => {
                if cached[..] != in_shape[..] || argmax.len() != g.len() {
                    return Err(mismatch());
                }
                let mut dx = Tensor::zeros(&in_shape);
                for (&src, &d) in argmax.iter().zip(g.data()) {
                    dx.data_mut()[src] += d;
                }
                dx
            }
            _ => return Err(mismatch()),
        };
    }
    Ok((grads, g))
}

fn rectifier_grad<T: Scalar>(g: &Tensor<T>, input: &Tensor<T>, slope: T, shape: &[usize]) -> Option<Tensor<T>> {
    if input.shape() != g.shape() {
        return None;
    }
    let data = g
        .data()
        .iter()
        .zip(input.data())
        .map(|(&d, &x)| if x > T::zero() { d } else { d * slope })
        .collect();
    Tensor::new(shape.to_vec(), data).ok()
}
