use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, ParamStore};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.0002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients abort before any
/// parameter is touched.
pub fn adam_step<T: Scalar>(params: &mut ParamStore<T>, grads: &Gradients<T>, cfg: &AdamConfig) -> Result<(), NnError> {
    let n_params = params.iter().count();
    if grads.iter().count() != n_params
        || params
            .iter()
            .zip(grads.iter())
            .any(|(p, g)| p.value.shape() != g.shape())
    {
        return Err(NnError::Mismatch("gradients do not match parameter shapes".into()));
    }
    if let Some((p, _)) = params.iter().zip(grads.iter()).find(|(_, g)| !g.is_finite()) {
        return Err(NnError::NonFinite(format!("gradient of {}", p.name)));
    }
    let t = params.advance_step() as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::of(1.0 - cfg.beta1.powi(t));
    let c2 = T::of(1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for (p, g) in params.iter_mut().zip(grads.iter()) {
        let m = p.first_moment.data_mut();
        let v = p.second_moment.data_mut();
        for (((w, m), v), &g) in p.value.data_mut().iter_mut().zip(m).zip(v).zip(g.data()) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
