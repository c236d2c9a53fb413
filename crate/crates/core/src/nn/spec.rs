//! Declarative layer stacks and their static shape checking.

use serde::{Deserialize, Serialize};

use super::NnError;

fn default_true() -> bool {
    true
}

/// One layer of a feed-forward stack. Shapes exclude the batch dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        #[serde(default = "default_true")]
        bias: bool,
    },
    Conv2dTranspose {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        #[serde(default = "default_true")]
        bias: bool,
    },
    Batchnorm2d {
        channels: usize,
    },
    LeakyRelu {
        negative_slope: f64,
    },
    Relu,
    Tanh,
    Flatten,
    Unflatten {
        channels: usize,
        height: usize,
        width: usize,
    },
    Linear {
        in_features: usize,
        out_features: usize,
    },
    MaxPool2d {
        kernel: usize,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Conv2d { .. } => "conv2d",
            Self::Conv2dTranspose { .. } => "conv2d_transpose",
            Self::Batchnorm2d { .. } => "batchnorm2d",
            Self::LeakyRelu { .. } => "leaky_relu",
            Self::Relu => "relu",
            Self::Tanh => "tanh",
            Self::Flatten => "flatten",
            Self::Unflatten { .. } => "unflatten",
            Self::Linear { .. } => "linear",
            Self::MaxPool2d { .. } => "max_pool2d",
        }
    }

    fn validate(&self, layer: usize) -> Result<(), NnError> {
        let bad = |detail: &str| {
            Err(NnError::InvalidLayer {
                layer,
                kind: self.kind(),
                detail: detail.to_owned(),
            })
        };
        match *self {
            Self::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            }
            | Self::Conv2dTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 {
                    return bad("channel counts must be >= 1");
                }
                if kernel == 0 || stride == 0 {
                    return bad("kernel and stride must be >= 1");
                }
            }
            Self::Batchnorm2d { channels } if channels == 0 => return bad("channels must be >= 1"),
            Self::LeakyRelu { negative_slope } if !negative_slope.is_finite() => {
                return bad("negative slope must be finite")
            }
            Self::Unflatten {
                channels,
                height,
                width,
            } if channels == 0 || height == 0 || width == 0 => return bad("dimensions must be >= 1"),
            Self::Linear {
                in_features,
                out_features,
            } if in_features == 0 || out_features == 0 => return bad("feature counts must be >= 1"),
            Self::MaxPool2d { kernel } if kernel == 0 => return bad("kernel must be >= 1"),
            _ => {}
        }
        Ok(())
    }

    /// Output per-sample shape for a given input per-sample shape.
    pub fn output_shape(&self, layer: usize, input: &[usize]) -> Result<Vec<usize>, NnError> {
        self.validate(layer)?;
        let err = |detail: String| NnError::Shape {
            layer,
            kind: self.kind(),
            detail,
        };
        let chw = |expect_c: Option<usize>| -> Result<(usize, usize, usize), NnError> {
            match *input {
                [c, h, w] => {
                    if let Some(e) = expect_c {
                        if c != e {
                            return Err(err(format!("expects {e} input channels, got {c}")));
                        }
                    }
                    Ok((c, h, w))
                }
                _ => Err(err(format!("expects a [C, H, W] input, got {input:?}"))),
            }
        };
        match *self {
            Self::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let (_, h, w) = chw(Some(in_channels))?;
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(err(format!("kernel {kernel} larger than padded input {h}x{w}")));
                }
                let oh = (h + 2 * padding - kernel) / stride + 1;
                let ow = (w + 2 * padding - kernel) / stride + 1;
                Ok(vec![out_channels, oh, ow])
            }
            Self::Conv2dTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let (_, h, w) = chw(Some(in_channels))?;
                let full_h = (h - 1) * stride + kernel;
                let full_w = (w - 1) * stride + kernel;
                if full_h <= 2 * padding || full_w <= 2 * padding {
                    return Err(err(format!("padding {padding} consumes the whole output")));
                }
                let (oh, ow) = (full_h - 2 * padding, full_w - 2 * padding);
                // The adjoint convolution must map the output back onto the input grid.
                if (oh + 2 * padding - kernel) / stride + 1 != h || (ow + 2 * padding - kernel) / stride + 1 != w {
                    return Err(err("geometry does not invert a strided convolution".into()));
                }
                Ok(vec![out_channels, oh, ow])
            }
            Self::Batchnorm2d { channels } => {
                chw(Some(channels))?;
                Ok(input.to_vec())
            }
            Self::LeakyRelu { .. } | Self::Relu | Self::Tanh => Ok(input.to_vec()),
            Self::Flatten => Ok(vec![input.iter().product()]),
            Self::Unflatten {
                channels,
                height,
                width,
            } => match *input {
                [f] if f == channels * height * width => Ok(vec![channels, height, width]),
                _ => Err(err(format!(
                    "expects [{}] input, got {input:?}",
                    channels * height * width
                ))),
            },
            Self::Linear {
                in_features,
                out_features,
            } => match *input {
                [f] if f == in_features => Ok(vec![out_features]),
                _ => Err(err(format!("expects [{in_features}] input, got {input:?}"))),
            },
            Self::MaxPool2d { kernel } => {
                let (c, h, w) = chw(None)?;
                if h < kernel || w < kernel {
                    return Err(err(format!("pool kernel {kernel} larger than {h}x{w}")));
                }
                Ok(vec![c, h / kernel, w / kernel])
            }
        }
    }
}

/// Ordered layer stack with a declared per-sample input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let spec = Self { input_shape, layers };
        spec.shapes()?;
        Ok(spec)
    }

    /// Per-sample shapes: entry 0 is the input, entry `i + 1` the output of layer `i`.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::InputShape {
                expected: vec![],
                found: self.input_shape.clone(),
            });
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        shapes.push(self.input_shape.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(i, &shapes[i])?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        Ok(self.shapes()?.pop().expect("shapes holds the input"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.shapes()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(i: usize, o: usize) -> LayerSpec {
        LayerSpec::Conv2d {
            in_channels: i,
            out_channels: o,
            kernel: 4,
            stride: 2,
            padding: 1,
            bias: true,
        }
    }

    #[test]
    fn strided_conv_halves() {
        let out = conv(1, 8).output_shape(0, &[1, 32, 32]).unwrap();
        assert_eq!(out, vec![8, 16, 16]);
    }

    #[test]
    fn transpose_doubles() {
        let t = LayerSpec::Conv2dTranspose {
            in_channels: 8,
            out_channels: 1,
            kernel: 4,
            stride: 2,
            padding: 1,
            bias: true,
        };
        assert_eq!(t.output_shape(0, &[8, 16, 16]).unwrap(), vec![1, 32, 32]);
    }

    #[test]
    fn mismatch_names_layer() {
        let spec = NetworkSpec {
            input_shape: vec![1, 32, 32],
            layers: vec![conv(1, 8), conv(4, 8)],
        };
        match spec.shapes().unwrap_err() {
            NnError::Shape { layer, kind, .. } => {
                assert_eq!(layer, 1);
                assert_eq!(kind, "conv2d");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn zero_stride_rejected() {
        let l = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
            stride: 0,
            padding: 0,
            bias: true,
        };
        assert!(matches!(
            l.output_shape(3, &[1, 8, 8]),
            Err(NnError::InvalidLayer { layer: 3, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let spec = NetworkSpec::new(
            vec![1, 8, 8],
            vec![
                conv(1, 2),
                LayerSpec::Batchnorm2d { channels: 2 },
                LayerSpec::LeakyRelu { negative_slope: 0.2 },
                LayerSpec::Flatten,
                LayerSpec::Linear {
                    in_features: 32,
                    out_features: 3,
                },
            ],
        )
        .unwrap();
        let text = spec.to_json();
        assert!(text.contains("\"kind\": \"leaky_relu\""));
        assert_eq!(NetworkSpec::from_json(&text).unwrap(), spec);
    }
}
