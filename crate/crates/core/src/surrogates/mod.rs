//! Surrogate models for load-frame sequences: three convolutional LSTM
//! joint models, a Koopman autoencoder and the unfilter CNN, with training
//! and autoregressive rollout.

mod arch;
mod rollout;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, read_checkpoint, write_checkpoint, ParamStore, Real, Tensor};

pub use arch::{build_body, ArchDims, Body, ModelArch, Variant};
pub use rollout::{kae_latent_rollout, rollout, rollout_case};
pub use train::{
    sequence_samples, train, train_unfilter, unfilter_pairs, EpochLog, KaeWeights, LossParts, TrainConfig, TrainReport,
};

/// Metadata stored with a checkpoint; enough to rebuild the model and map
/// its outputs back to Pa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch: ModelArch,
    pub seed: u64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate<T = f32> {
    pub arch: ModelArch,
    pub store: ParamStore<T>,
    pub body: Body,
}

impl<T: Real> Surrogate<T> {
    pub fn build(arch: ModelArch, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let body = build_body(&arch, &mut store, &mut nn::rng(seed))?;
        Ok(Self { arch, store, body })
    }

    pub fn param_count(&self) -> usize {
        self.body.param_count()
    }

    fn check_window(&self, window: &Tensor<T>) -> Result<()> {
        let p = self.arch.dims.patch;
        let ok = match (self.arch.variant, &window.shape[..]) {
            (Variant::Unfilter, [_, h, w]) => *h == p && *w == p,
            (_, [_, l, h, w]) => *l == self.arch.ell && *h == p && *w == p,
            _ => false,
        };
        if !ok {
            return Err(Error::shape(self.arch.variant.name(), format!("input {:?} for patch {p}", window.shape)));
        }
        Ok(())
    }

    /// Next frame `[n, p, p]` from windows `[n, ell, p, p]` (blurred frames
    /// `[n, p, p]` for the unfilter model).
    pub fn predict(&self, window: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_window(window)?;
        match &self.body {
            Body::Joint(net) | Body::Unfilter(net) => net.infer(&self.store, window.clone()),
            Body::Koopman { encoder, k, decoder } => {
                let z = encoder.infer(&self.store, window.clone())?;
                decoder.infer(&self.store, k.forward(&self.store, &z)?)
            }
        }
    }

    fn koopman(&self) -> Result<(&nn::Sequential, &nn::Dense, &nn::Sequential)> {
        match &self.body {
            Body::Koopman { encoder, k, decoder } => Ok((encoder, k, decoder)),
            _ => Err(Error::config(format!("{} has no latent linear map", self.arch.variant.name()))),
        }
    }

    pub fn encode(&self, window: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_window(window)?;
        let (encoder, _, _) = self.koopman()?;
        encoder.infer(&self.store, window.clone())
    }

    pub fn advance(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, k, _) = self.koopman()?;
        k.forward(&self.store, z)
    }

    pub fn decode(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, _, decoder) = self.koopman()?;
        decoder.infer(&self.store, z.clone())
    }

    /// The latent map as a row-major `latent x latent` matrix acting on
    /// column vectors.
    pub fn koopman_matrix(&self) -> Result<Tensor<T>> {
        let (_, k, _) = self.koopman()?;
        Ok(self.store.value(k.w).clone())
    }
}

/// Trainable parameters of `arch` at its configured size.
pub fn count_params(arch: &ModelArch) -> Result<usize> {
    arch.validate()?;
    let mut store = ParamStore::<f32>::new();
    let body = build_body(arch, &mut store, &mut nn::rng(0))?;
    debug_assert_eq!(body.param_count(), store.count());
    Ok(store.count())
}

impl Surrogate<f32> {
    pub fn save(&self, path: &Path, meta: &ModelMeta) -> Result<()> {
        let tensors: Vec<(String, Tensor<f32>)> =
            self.store.iter_sorted().map(|p| (p.name.clone(), p.value.clone())).collect();
        write_checkpoint(path, &serde_json::to_string(meta)?, &tensors)
    }

    pub fn load(path: &Path) -> Result<(Self, ModelMeta)> {
        let (meta, tensors) = read_checkpoint(path)?;
        let meta: ModelMeta = serde_json::from_str(&meta)?;
        let mut model = Self::build(meta.arch, meta.seed)?;
        model.store.load_values(&tensors)?;
        Ok((model, meta))
    }
}
