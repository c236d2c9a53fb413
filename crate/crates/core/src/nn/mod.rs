//! Minimal neural-network engine: the fixed layer set needed by the
//! autoencoder and the downstream classifier, with hand-written backward passes.

pub mod adam;
pub mod arch;
pub mod checkpoint;
mod engine;
mod error;
pub mod gradcheck;
pub mod loss;
mod params;
mod spec;

pub use adam::{adam_step, AdamConfig};
pub use engine::{backward, forward, infer, ForwardCache, Mode, BN_EPS, BN_MOMENTUM};
pub use error::NnError;
pub use gradcheck::{check_random, grad_check, toy_networks, GradCheckReport};
pub use loss::{cross_entropy, mse_loss};
pub use params::{Gradients, Init, LayerParams, Param, ParamStore, RunningStats};
pub use spec::{LayerSpec, NetworkSpec};
