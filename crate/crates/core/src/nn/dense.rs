use super::init::glorot_uniform;
use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};
use super::Rng;
use crate::error::{Error, Result};

/// `y = x W^T + b` on `[batch, in]` rows, `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub name: String,
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w = store.add(format!("{name}/kernel"), glorot_uniform(&[outputs, inputs], inputs, outputs, rng))?;
        let b = if bias { Some(store.add(format!("{name}/bias"), Tensor::zeros(&[outputs]))?) } else { None };
        Ok(Self { name: name.to_string(), w, b, inputs, outputs })
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + if self.b.is_some() { self.outputs } else { 0 }
    }

    fn check<T: Real>(&self, x: &Tensor<T>) -> Result<usize> {
        if x.row_len() != self.inputs || x.shape.len() < 2 {
            return Err(Error::shape(&self.name, format!("expected [batch, {}], got {:?}", self.inputs, x.shape)));
        }
        Ok(x.batch())
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check(x)?;
        let mut y = Tensor::zeros(&[n, self.outputs]);
        if let Some(b) = self.b {
            let b = &store.value(b).data;
            for row in y.data.chunks_mut(self.outputs) {
                row.copy_from_slice(b);
            }
        }
        matmul_bt_acc(&x.data, &store.value(self.w).data, &mut y.data, n, self.inputs, self.outputs);
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let n = x.batch();
        // dW[out, in] += dy^T x
        matmul_at_acc(&dy.data, &x.data, &mut store.grad_mut(self.w).data, n, self.outputs, self.inputs);
        if let Some(b) = self.b {
            let g = &mut store.grad_mut(b).data;
            for row in dy.data.chunks(self.outputs) {
                for (gb, &d) in g.iter_mut().zip(row) {
                    *gb += d;
                }
            }
        }
        let mut dx = Tensor::zeros(&x.shape);
        matmul_acc(&dy.data, &store.value(self.w).data, &mut dx.data, n, self.outputs, self.inputs);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rng;

    #[test]
    fn identity_weights_pass_through() {
        let mut s = ParamStore::<f64>::new();
        let d = Dense::new(&mut s, "d", 3, 3, true, &mut rng(0)).unwrap();
        s.value_mut(d.w).data = vec![1., 0., 0., 0., 1., 0., 0., 0., 1.];
        let x = Tensor::new(&[2, 3], vec![1., -2., 3., 0.5, 0.25, -4.]).unwrap();
        assert_eq!(d.forward(&s, &x).unwrap(), x);
    }

    #[test]
    fn full_scale_output_layer_count() {
        let mut s = ParamStore::<f32>::new();
        let d = Dense::new(&mut s, "out", 100, 16384, true, &mut rng(0)).unwrap();
        assert_eq!(d.param_count(), 1_654_784);
        assert_eq!(s.count(), 1_654_784);
    }

    #[test]
    fn wrong_width_names_layer() {
        let mut s = ParamStore::<f32>::new();
        let d = Dense::new(&mut s, "latent", 4, 2, true, &mut rng(0)).unwrap();
        let err = d.forward(&s, &Tensor::zeros(&[1, 5])).unwrap_err();
        assert!(err.to_string().contains("latent"));
    }
}
