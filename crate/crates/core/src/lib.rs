pub mod data;
pub mod eval;
pub mod nn;
pub mod oversampler;
pub mod raster;
pub mod rng;
pub mod smote;
pub mod tensor;
pub mod trainer;

pub use nn::{LayerSpec, NetworkSpec, NnError, ParamStore};
pub use tensor::{Scalar, Tensor};
