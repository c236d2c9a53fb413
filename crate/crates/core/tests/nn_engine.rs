use deepsmote_core::nn::arch::AutoencoderArch;
use deepsmote_core::nn::*;
use deepsmote_core::rng;
use deepsmote_core::Tensor;
use proptest::prelude::*;
use rand::Rng;

const SEEDS: u64 = 20;

#[test]
fn every_layer_kind_matches_finite_differences() {
    for (name, spec) in toy_networks().unwrap() {
        let mut worst = 0.0f64;
        for seed in 0..SEEDS {
            let r = check_random::<f64>(&spec, seed, 2, 0.5, 1e-3).unwrap();
            assert!(r.checked > 0, "{name}: every probe skipped");
            worst = worst.max(r.max_relative_error);
        }
        assert!(worst <= 1e-2, "{name}: max relative error {worst:.3e}");
    }
}

#[test]
fn zero_network_checks_clean() {
    let spec = NetworkSpec::new(
        vec![3],
        vec![
            LayerSpec::Linear {
                in_features: 3,
                out_features: 2,
            },
            LayerSpec::Tanh,
        ],
    )
    .unwrap();
    let params: ParamStore<f64> = ParamStore::init(&spec, Init::Normal { std: 0.0 }, &mut rng::stream(0, "z")).unwrap();
    let input = Tensor::zeros(&[2, 3]);
    let target = Tensor::full(&[2, 2], 0.5);
    let r = grad_check(&spec, &params, &input, |o| mse_loss(o, &target), 1e-3).unwrap();
    assert!(r.max_relative_error < 1e-6, "{r:?}");
}

#[test]
fn oversized_network_refused() {
    let spec = AutoencoderArch::default().encoder_spec().unwrap();
    let params: ParamStore<f64> = ParamStore::init(&spec, Init::default(), &mut rng::stream(0, "big")).unwrap();
    let input = Tensor::zeros(&[2, 1, 32, 32]);
    let err = grad_check(&spec, &params, &input, |o| mse_loss(o, &Tensor::zeros(o.shape())), 1e-3).unwrap_err();
    assert!(matches!(err, NnError::TooLarge { .. }));
}

#[test]
fn linear_backward_closed_form() {
    let spec = NetworkSpec::new(
        vec![2],
        vec![LayerSpec::Linear {
            in_features: 2,
            out_features: 2,
        }],
    )
    .unwrap();
    let mut params: ParamStore<f64> =
        ParamStore::init(&spec, Init::Normal { std: 1.0 }, &mut rng::stream(4, "l")).unwrap();
    let x = Tensor::new(vec![1, 2], vec![0.5, -2.0]).unwrap();
    let g = Tensor::new(vec![1, 2], vec![1.5, -0.25]).unwrap();
    let (_, cache) = forward(&spec, &mut params, &x, Mode::Train).unwrap();
    let (grads, _) = backward(&spec, &params, &cache, &g).unwrap();
    let gw = grads.layers[0][0].data();
    let expected = [1.5 * 0.5, 1.5 * -2.0, -0.25 * 0.5, -0.25 * -2.0];
    for (a, b) in gw.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(grads.layers[0][1].data(), &[1.5, -0.25]);
}

#[test]
fn tanh_passes_gradient_at_zero() {
    let spec = NetworkSpec::new(vec![3], vec![LayerSpec::Tanh]).unwrap();
    let mut params: ParamStore = ParamStore::init(&spec, Init::default(), &mut rng::stream(0, "t")).unwrap();
    let x = Tensor::zeros(&[1, 3]);
    let g = Tensor::new(vec![1, 3], vec![0.3, -1.0, 2.0]).unwrap();
    let (_, cache) = forward(&spec, &mut params, &x, Mode::Train).unwrap();
    let (_, gx) = backward(&spec, &params, &cache, &g).unwrap();
    assert_eq!(gx.data(), g.data());
}

#[test]
fn batchnorm_eval_tracks_train_statistics() {
    let spec = NetworkSpec::new(vec![3, 4, 4], vec![LayerSpec::Batchnorm2d { channels: 3 }]).unwrap();
    let mut params: ParamStore = ParamStore::init(&spec, Init::default(), &mut rng::stream(0, "bn")).unwrap();
    let mut r = rng::stream(1, "bn-data");
    let batch = 256;
    // Channel c ~ mean 2 + c, std 1 + c: a fixed distribution per channel.
    let sample = |r: &mut rng::Rng| {
        let d: Vec<f32> = (0..batch * 3 * 16)
            .map(|i| {
                let c = (i / 16) % 3;
                let z: f32 = (0..3).map(|_| r.random_range(-1.0f32..1.0)).sum();
                2.0 + c as f32 + (1.0 + c as f32) * z
            })
            .collect();
        Tensor::new(vec![batch, 3, 4, 4], d).unwrap()
    };
    for _ in 0..200 {
        let x = sample(&mut r);
        forward(&spec, &mut params, &x, Mode::Train).unwrap();
    }
    let x = sample(&mut r);
    let (train_out, _) = forward(&spec, &mut params.clone(), &x, Mode::Train).unwrap();
    let eval_out = infer(&spec, &params, &x).unwrap();
    let diff = train_out.max_abs_diff(&eval_out);
    assert!(diff <= 0.1, "max per-element difference {diff}");
}

#[test]
fn training_steps_are_deterministic() {
    let arch = AutoencoderArch {
        widths: vec![4; 4],
        latent_dim: 8,
        ..Default::default()
    };
    let spec = arch.encoder_spec().unwrap();
    let run = || {
        let mut p: ParamStore = ParamStore::init(&spec, Init::default(), &mut rng::stream(7, "det")).unwrap();
        let mut r = rng::stream(8, "x");
        for _ in 0..5 {
            let x = Tensor::new(
                vec![3, 1, 32, 32],
                (0..3 * 1024).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (out, cache) = forward(&spec, &mut p, &x, Mode::Train).unwrap();
            let (_, g) = mse_loss(&out, &Tensor::zeros(out.shape())).unwrap();
            let (grads, _) = backward(&spec, &p, &cache, &g).unwrap();
            adam_step(&mut p, &grads, &AdamConfig::default()).unwrap();
        }
        p
    };
    assert_eq!(run(), run());
}

fn arb_layer(in_shape: Vec<usize>) -> BoxedStrategy<(LayerSpec, Vec<usize>)> {
    let mut options: Vec<BoxedStrategy<(LayerSpec, Vec<usize>)>> = Vec::new();
    if in_shape.len() == 3 {
        let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
        options.push(
            (1usize..4, 1usize..4, 1usize..3, 0usize..2)
                .prop_filter_map("kernel fits", move |(o, k, s, p)| {
                    let l = LayerSpec::Conv2d {
                        in_channels: c,
                        out_channels: o,
                        kernel: k,
                        stride: s,
                        padding: p,
                        bias: true,
                    };
                    let out = l.output_shape(0, &[c, h, w]).ok()?;
                    Some((l, out))
                })
                .boxed(),
        );
        options.push(
            (1usize..4, 1usize..4, 1usize..3, 0usize..2)
                .prop_filter_map("geometry", move |(o, k, s, p)| {
                    let l = LayerSpec::Conv2dTranspose {
                        in_channels: c,
                        out_channels: o,
                        kernel: k,
                        stride: s,
                        padding: p,
                        bias: true,
                    };
                    let out = l
                        .output_shape(0, &[c, h, w])
                        .ok()
                        .filter(|o| o[1] <= 12 && o[2] <= 12)?;
                    Some((l, out))
                })
                .boxed(),
        );
        options.push(Just((LayerSpec::Batchnorm2d { channels: c }, in_shape.clone())).boxed());
        if h % 2 == 0 && w % 2 == 0 {
            options.push(Just((LayerSpec::MaxPool2d { kernel: 2 }, vec![c, h / 2, w / 2])).boxed());
        }
        options.push(Just((LayerSpec::Flatten, vec![c * h * w])).boxed());
    } else {
        let n = in_shape[0];
        options.push(
            (1usize..6)
                .prop_map(move |o| {
                    (
                        LayerSpec::Linear {
                            in_features: n,
                            out_features: o,
                        },
                        vec![o],
                    )
                })
                .boxed(),
        );
        if n % 4 == 0 {
            options.push(
                Just((
                    LayerSpec::Unflatten {
                        channels: n / 4,
                        height: 2,
                        width: 2,
                    },
                    vec![n / 4, 2, 2],
                ))
                .boxed(),
            );
        }
    }
    options.push(Just((LayerSpec::Relu, in_shape.clone())).boxed());
    options.push(Just((LayerSpec::Tanh, in_shape.clone())).boxed());
    options.push(Just((LayerSpec::LeakyRelu { negative_slope: 0.2 }, in_shape)).boxed());
    proptest::strategy::Union::new(options).boxed()
}

fn arb_network(depth: usize) -> BoxedStrategy<(Vec<usize>, Vec<LayerSpec>, Vec<usize>)> {
    let start = (1usize..3, 2usize..7, 2usize..7)
        .prop_map(|(c, h, w)| (vec![c, h, w], Vec::new(), vec![c, h, w]))
        .boxed();
    (0..depth).fold(start, |acc, _| {
        acc.prop_flat_map(|(input, layers, shape)| {
            arb_layer(shape).prop_map(move |(l, out)| {
                let mut layers = layers.clone();
                layers.push(l);
                (input.clone(), layers, out)
            })
        })
        .boxed()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_shape_matches_static_chain((input, layers, expected) in arb_network(4), batch in 1usize..3) {
        let spec = NetworkSpec::new(input.clone(), layers).unwrap();
        prop_assert_eq!(spec.output_shape().unwrap(), expected.clone());
        let mut params: ParamStore = ParamStore::init(&spec, Init::default(), &mut rng::stream(0, "shape")).unwrap();
        let mut shape = vec![batch];
        shape.extend(&input);
        let n = shape.iter().product();
        let x = Tensor::new(shape, vec![0.25; n]).unwrap();
        let (out, _) = forward(&spec, &mut params, &x, Mode::Train).unwrap();
        let mut full = vec![batch];
        full.extend(expected);
        prop_assert_eq!(out.shape(), &full[..]);
    }
}
