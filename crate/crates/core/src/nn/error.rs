use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer} ({kind}): {detail}")]
    Shape {
        layer: usize,
        kind: &'static str,
        detail: String,
    },
    #[error("layer {layer} ({kind}) has invalid hyperparameters: {detail}")]
    InvalidLayer {
        layer: usize,
        kind: &'static str,
        detail: String,
    },
    #[error("input per-sample shape {found:?} does not match network input {expected:?}")]
    InputShape { expected: Vec<usize>, found: Vec<usize> },
    #[error("shape mismatch: {0}")]
    Mismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("forward cache does not match network: {0}")]
    Cache(String),
    #[error("parameters do not match network: {0}")]
    Params(String),
    #[error("gradient check needs at most {max} parameters, network has {found}")]
    TooLarge { max: usize, found: usize },
    #[error("checkpoint format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },
    #[error("invalid network description: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
