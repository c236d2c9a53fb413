//! Network layouts used by the pipeline.

use serde::{Deserialize, Serialize};

use super::{LayerSpec, NetworkSpec, NnError};

pub const LEAKY_SLOPE: f64 = 0.2;

/// DCGAN-style convolutional autoencoder: four stride-2 convolutions down to
/// a linear latent code, mirrored by four transposed convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderArch {
    pub image_channels: usize,
    /// Square input side; must be divisible by 16.
    pub image_size: usize,
    /// Channel width of each of the four convolutional stages.
    pub widths: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for AutoencoderArch {
    fn default() -> Self {
        Self {
            image_channels: 1,
            image_size: 32,
            widths: vec![64; 4],
            latent_dim: 300,
        }
    }
}

impl AutoencoderArch {
    fn validate(&self) -> Result<(), NnError> {
        if self.widths.len() != 4 || self.widths.contains(&0) {
            return Err(NnError::Mismatch(format!(
                "autoencoder needs four positive stage widths, got {:?}",
                self.widths
            )));
        }
        if self.image_size % 16 != 0 || self.image_size == 0 {
            return Err(NnError::Mismatch(format!(
                "image size {} is not a positive multiple of 16",
                self.image_size
            )));
        }
        Ok(())
    }

    fn bottleneck(&self) -> (usize, usize) {
        (self.widths[3], self.image_size / 16)
    }

    pub fn encoder_spec(&self) -> Result<NetworkSpec, NnError> {
        self.validate()?;
        let mut layers = Vec::new();
        let mut channels = self.image_channels;
        for &w in &self.widths {
            layers.push(LayerSpec::Conv2d {
                in_channels: channels,
                out_channels: w,
                kernel: 4,
                stride: 2,
                padding: 1,
                // batch norm's shift makes a bias redundant
                bias: false,
            });
            layers.push(LayerSpec::Batchnorm2d { channels: w });
            layers.push(LayerSpec::LeakyRelu {
                negative_slope: LEAKY_SLOPE,
            });
            channels = w;
        }
        let (c, side) = self.bottleneck();
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Linear {
            in_features: c * side * side,
            out_features: self.latent_dim,
        });
        NetworkSpec::new(vec![self.image_channels, self.image_size, self.image_size], layers)
    }

    pub fn decoder_spec(&self) -> Result<NetworkSpec, NnError> {
        self.validate()?;
        let (c, side) = self.bottleneck();
        let mut layers = vec![
            LayerSpec::Linear {
                in_features: self.latent_dim,
                out_features: c * side * side,
            },
            LayerSpec::Unflatten {
                channels: c,
                height: side,
                width: side,
            },
            LayerSpec::Relu,
        ];
        let mut outs: Vec<usize> = self.widths[..3].iter().rev().copied().collect();
        outs.push(self.image_channels);
        let mut channels = c;
        for (stage, &out) in outs.iter().enumerate() {
            let last = stage == 3;
            layers.push(LayerSpec::Conv2dTranspose {
                in_channels: channels,
                out_channels: out,
                kernel: 4,
                stride: 2,
                padding: 1,
                bias: last,
            });
            if last {
                layers.push(LayerSpec::Tanh);
            } else {
                layers.push(LayerSpec::Batchnorm2d { channels: out });
                layers.push(LayerSpec::Relu);
            }
            channels = out;
        }
        NetworkSpec::new(vec![self.latent_dim], layers)
    }
}

/// Small CNN used as the downstream classifier: two 3x3 conv + ReLU + 2x2
/// max-pool stages (16 and 32 channels), then two linear layers.
pub fn classifier_spec(
    image_channels: usize,
    image_size: usize,
    classes: usize,
    hidden: usize,
) -> Result<NetworkSpec, NnError> {
    let conv = |i, o| LayerSpec::Conv2d {
        in_channels: i,
        out_channels: o,
        kernel: 3,
        stride: 1,
        padding: 1,
        bias: true,
    };
    let side = image_size / 4;
    NetworkSpec::new(
        vec![image_channels, image_size, image_size],
        vec![
            conv(image_channels, 16),
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { kernel: 2 },
            conv(16, 32),
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { kernel: 2 },
            LayerSpec::Flatten,
            LayerSpec::Linear {
                in_features: 32 * side * side,
                out_features: hidden,
            },
            LayerSpec::Relu,
            LayerSpec::Linear {
                in_features: hidden,
                out_features: classes,
            },
        ],
    )
}
