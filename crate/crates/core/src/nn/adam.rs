use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// One bias-corrected Adam update of every parameter from its gradient.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, cfg: &Adam) {
    store.step += 1;
    let t = store.step as f64;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::of(1.0 - cfg.beta1.powf(t));
    let c2 = T::of(1.0 - cfg.beta2.powf(t));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for p in store.params_mut() {
        for (((w, &g), m), v) in p.value.data.iter_mut().zip(&p.grad.data).zip(p.m.iter_mut()).zip(p.v.iter_mut()) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *w -= lr * mh / (vh.sqrt() + eps);
        }
    }
}
