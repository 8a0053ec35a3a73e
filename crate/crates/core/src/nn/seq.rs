use super::act::Activation;
use super::conv::{Conv2d, Conv2dTranspose};
use super::dense::Dense;
use super::lstm::{Lstm, LstmCache};
use super::nonlocal::{NonLocal, NonLocalCache};
use super::params::ParamStore;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(Dense, Activation),
    Conv(Conv2d, Activation),
    ConvT(Conv2dTranspose, Activation),
    Lstm(Lstm),
    NonLocal(NonLocal),
    /// Per-sample shape; the leading dimension absorbs the rest, so
    /// `[n, 3, h, w, 1] -> [h, w, 1]` folds time into the batch.
    Reshape(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cache<T> {
    Affine { x: Tensor<T>, pre: Tensor<T>, y: Tensor<T> },
    Lstm(LstmCache<T>),
    NonLocal { x: Tensor<T>, cache: NonLocalCache<T> },
    Reshape { from: Vec<usize> },
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(d, _) => d.param_count(),
            Layer::Conv(c, _) => c.param_count(),
            Layer::ConvT(c, _) => c.param_count(),
            Layer::Lstm(l) => l.param_count(),
            Layer::NonLocal(n) => n.param_count(),
            Layer::Reshape(_) => 0,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: Tensor<T>) -> Result<(Tensor<T>, Cache<T>)> {
        let affine = |pre: Tensor<T>, act: Activation, x: Tensor<T>| {
            let y = act.forward(&pre);
            (y.clone(), Cache::Affine { x, pre, y })
        };
        Ok(match self {
            Layer::Dense(d, act) => affine(d.forward(store, &x)?, *act, x),
            Layer::Conv(c, act) => affine(c.forward(store, &x)?, *act, x),
            Layer::ConvT(c, act) => affine(c.forward(store, &x)?, *act, x),
            Layer::Lstm(l) => {
                let (y, cache) = l.forward(store, &x)?;
                (y, Cache::Lstm(cache))
            }
            Layer::NonLocal(n) => {
                let (y, cache) = n.forward(store, &x)?;
                (y, Cache::NonLocal { x, cache })
            }
            Layer::Reshape(shape) => {
                let per: usize = shape.iter().product();
                if per == 0 || x.len() % per != 0 {
                    return Err(Error::shape("reshape", format!("{:?} into [_, {shape:?}]", x.shape)));
                }
                let from = x.shape.clone();
                let mut full = vec![x.len() / per];
                full.extend_from_slice(shape);
                (x.reshape(&full)?, Cache::Reshape { from })
            }
        })
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, cache: &Cache<T>, dy: Tensor<T>) -> Result<Tensor<T>> {
        let mismatch = || Error::shape("backward", "cache does not belong to this layer");
        match (self, cache) {
            (Layer::Dense(d, act), Cache::Affine { x, pre, y }) => Ok(d.backward(store, x, &act.backward(pre, y, &dy))),
            (Layer::Conv(c, act), Cache::Affine { x, pre, y }) => c.backward(store, x, &act.backward(pre, y, &dy)),
            (Layer::ConvT(c, act), Cache::Affine { x, pre, y }) => c.backward(store, x, &act.backward(pre, y, &dy)),
            (Layer::Lstm(l), Cache::Lstm(c)) => Ok(l.backward(store, c, &dy)),
            (Layer::NonLocal(n), Cache::NonLocal { x, cache }) => n.backward(store, x, cache, &dy),
            (Layer::Reshape(_), Cache::Reshape { from }) => dy.reshape(from),
            _ => Err(mismatch()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, mut x: Tensor<T>) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(store, x)?;
            caches.push(c);
            x = y;
        }
        Ok((x, caches))
    }

    pub fn infer<T: Real>(&self, store: &ParamStore<T>, x: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(store, x)?.0)
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, caches: &[Cache<T>], mut dy: Tensor<T>) -> Result<Tensor<T>> {
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            dy = layer.backward(store, cache, dy)?;
        }
        Ok(dy)
    }
}
