use super::act::{softmax_rows, softmax_rows_backward};
use super::init::glorot_uniform;
use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};
use super::Rng;
use crate::error::{Error, Result};

/// Embedded-Gaussian non-local block with a residual connection:
/// `z = W(softmax(theta(x) phi(x)^T) g(x)) + x` over all `h w` positions.
/// theta, phi, g map C to C/2 and W maps back to C, all 1x1 without bias.
#[derive(Clone, Debug, PartialEq)]
pub struct NonLocal {
    pub name: String,
    pub theta: ParamId,
    pub phi: ParamId,
    pub g: ParamId,
    pub w: ParamId,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonLocalCache<T> {
    theta: Vec<T>,
    phi: Vec<T>,
    g: Vec<T>,
    attn: Vec<T>,
    y: Vec<T>,
}

impl NonLocal {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, rng: &mut Rng) -> Result<Self> {
        if channels == 0 || channels % 2 != 0 {
            return Err(Error::config(format!("{name}: non-local block needs an even channel count, got {channels}")));
        }
        let half = channels / 2;
        let mut proj = |suffix: &str, a: usize, b: usize| store.add(format!("{name}/{suffix}"), glorot_uniform(&[a, b], a, b, rng));
        let theta = proj("theta", channels, half)?;
        let phi = proj("phi", channels, half)?;
        let g = proj("g", channels, half)?;
        let w = proj("w", half, channels)?;
        Ok(Self { name: name.to_string(), theta, phi, g, w, channels })
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels * self.channels
    }

    fn dims<T: Real>(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        match x.shape[..] {
            [b, h, w, c] if c == self.channels => Ok((b, h * w)),
            _ => Err(Error::shape(&self.name, format!("expected [batch, h, w, {}], got {:?}", self.channels, x.shape))),
        }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, NonLocalCache<T>)> {
        let (nb, p) = self.dims(x)?;
        let (c, ch) = (self.channels, self.channels / 2);
        let rows = nb * p;
        let mut cache = NonLocalCache {
            theta: vec![T::zero(); rows * ch],
            phi: vec![T::zero(); rows * ch],
            g: vec![T::zero(); rows * ch],
            attn: Vec::with_capacity(nb * p * p),
            y: vec![T::zero(); rows * ch],
        };
        matmul_acc(&x.data, &store.value(self.theta).data, &mut cache.theta, rows, c, ch);
        matmul_acc(&x.data, &store.value(self.phi).data, &mut cache.phi, rows, c, ch);
        matmul_acc(&x.data, &store.value(self.g).data, &mut cache.g, rows, c, ch);
        for b in 0..nb {
            let r = b * p * ch..(b + 1) * p * ch;
            let mut s = vec![T::zero(); p * p];
            matmul_bt_acc(&cache.theta[r.clone()], &cache.phi[r.clone()], &mut s, p, ch, p);
            let a = softmax_rows(&s, p);
            matmul_acc(&a, &cache.g[r.clone()], &mut cache.y[r], p, p, ch);
            cache.attn.extend(a);
        }
        let mut z = x.clone();
        matmul_acc(&cache.y, &store.value(self.w).data, &mut z.data, rows, ch, c);
        Ok((z, cache))
    }

    pub fn backward<T: Real>(
        &self,
        store: &mut ParamStore<T>,
        x: &Tensor<T>,
        cache: &NonLocalCache<T>,
        dz: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let (nb, p) = self.dims(x)?;
        let (c, ch) = (self.channels, self.channels / 2);
        let rows = nb * p;
        matmul_at_acc(&cache.y, &dz.data, &mut store.grad_mut(self.w).data, rows, ch, c);
        let mut dy = vec![T::zero(); rows * ch];
        matmul_bt_acc(&dz.data, &store.value(self.w).data, &mut dy, rows, c, ch);
        let mut dtheta = vec![T::zero(); rows * ch];
        let mut dphi = vec![T::zero(); rows * ch];
        let mut dg = vec![T::zero(); rows * ch];
        for b in 0..nb {
            let r = b * p * ch..(b + 1) * p * ch;
            let a = &cache.attn[b * p * p..(b + 1) * p * p];
            let mut da = vec![T::zero(); p * p];
            matmul_bt_acc(&dy[r.clone()], &cache.g[r.clone()], &mut da, p, ch, p);
            matmul_at_acc(a, &dy[r.clone()], &mut dg[r.clone()], p, p, ch);
            let ds = softmax_rows_backward(a, &da, p);
            matmul_acc(&ds, &cache.phi[r.clone()], &mut dtheta[r.clone()], p, p, ch);
            matmul_at_acc(&ds, &cache.theta[r.clone()], &mut dphi[r.clone()], p, p, ch);
        }
        let mut dx = dz.clone();
        for (id, d) in [(self.theta, &dtheta), (self.phi, &dphi), (self.g, &dg)] {
            matmul_at_acc(&x.data, d, &mut store.grad_mut(id).data, rows, c, ch);
            matmul_bt_acc(d, &store.value(id).data, &mut dx.data, rows, ch, c);
        }
        Ok(dx)
    }
}
