use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    koopman_rotation_blocks, rotation_angles, Activation, Conv2d, Conv2dTranspose, Dense, Layer, Lstm, NonLocal, ParamStore,
    Real, Rng, Sequential,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Convolutional encoder, two LSTMs, dense output of the full frame.
    Cjm,
    /// Convolutional encoder, two LSTMs, latent output and a transposed
    /// convolutional decoder.
    Cjmdd,
    /// CJM with non-local blocks after the third and fourth convolution.
    Cjmnlb,
    /// Koopman autoencoder with a bias-free linear latent map.
    Kae,
    /// Four stride-1 convolutions mapping blurred to unblurred frames.
    Unfilter,
}

impl Variant {
    pub const SURROGATES: [Variant; 4] = [Variant::Cjm, Variant::Cjmdd, Variant::Cjmnlb, Variant::Kae];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cjm => "cjm",
            Variant::Cjmdd => "cjmdd",
            Variant::Cjmnlb => "cjmnlb",
            Variant::Kae => "kae",
            Variant::Unfilter => "unfilter",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Variant::Cjm, Variant::Cjmdd, Variant::Cjmnlb, Variant::Kae, Variant::Unfilter]
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown architecture {s:?} (cjm, cjmdd, cjmnlb, kae, unfilter)")))
    }
}

/// Widths of one architecture family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDims {
    pub patch: usize,
    /// Filters of the four stride-2 encoder convolutions (the decoder
    /// mirrors them).
    pub filters: [usize; 4],
    pub latent: usize,
    pub lstm_units: usize,
    /// Filters of the first three unfilter convolutions.
    pub unfilter_filters: [usize; 3],
}

impl ArchDims {
    /// Full-size dims for 128 x 128 patches.
    pub fn full() -> Self {
        Self { patch: 128, filters: [8, 16, 32, 64], latent: 10, lstm_units: 100, unfilter_filters: [16, 32, 64] }
    }

    /// Same topology with narrower layers for 32 x 32 patches.
    pub fn desk() -> Self {
        Self { patch: 32, filters: [4, 8, 16, 16], latent: 10, lstm_units: 32, unfilter_filters: [8, 8, 8] }
    }

    fn bottleneck(&self) -> usize {
        self.patch / 16
    }

    fn flat(&self) -> usize {
        self.bottleneck() * self.bottleneck() * self.filters[3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArch {
    pub variant: Variant,
    /// Number of input frames.
    pub ell: usize,
    pub dims: ArchDims,
}

impl ModelArch {
    pub fn full(variant: Variant) -> Self {
        Self { variant, ell: 3, dims: ArchDims::full() }
    }

    pub fn desk(variant: Variant) -> Self {
        Self { variant, ell: 3, dims: ArchDims::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dims.patch;
        if p < 16 || p % 16 != 0 {
            return Err(Error::config(format!("patch size {p} must be a multiple of 16 (four stride-2 halvings)")));
        }
        if self.ell == 0 {
            return Err(Error::config("input window ell must be at least 1"));
        }
        if self.dims.latent == 0 || self.dims.lstm_units == 0 || self.dims.filters.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.variant == Variant::Kae && self.dims.latent % 2 != 0 {
            return Err(Error::config("the Koopman latent size must be even"));
        }
        Ok(())
    }
}

/// Layer stacks of a built model. `Joint` and `Unfilter` map
/// `[n, ell, p, p]` (or `[n, p, p]`) to `[n, p, p]`; the Koopman parts are
/// kept apart so the latent state can be advanced on its own.
#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Joint(Sequential),
    Koopman { encoder: Sequential, k: Dense, decoder: Sequential },
    Unfilter(Sequential),
}

fn encoder_convs<T: Real>(
    store: &mut ParamStore<T>,
    dims: &ArchDims,
    nonlocal: bool,
    rng: &mut Rng,
) -> Result<Vec<Layer>> {
    let p = dims.patch;
    let mut layers = vec![Layer::Reshape(vec![p, p, 1])];
    let mut inputs = 1;
    for (i, &f) in dims.filters.iter().enumerate() {
        layers.push(Layer::Conv(Conv2d::new(store, &format!("enc_conv{}", i + 1), inputs, f, 2, rng)?, Activation::LeakyRelu));
        if nonlocal && i >= 2 {
            layers.push(Layer::NonLocal(NonLocal::new(store, &format!("enc_nonlocal{}", i + 1), f, rng)?));
        }
        inputs = f;
    }
    Ok(layers)
}

fn conv_decoder<T: Real>(store: &mut ParamStore<T>, dims: &ArchDims, rng: &mut Rng) -> Result<Vec<Layer>> {
    let b = dims.bottleneck();
    let f = dims.filters;
    let mut layers = vec![
        Layer::Dense(Dense::new(store, "dec_dense", dims.latent, dims.flat(), true, rng)?, Activation::LeakyRelu),
        Layer::Reshape(vec![b, b, f[3]]),
    ];
    let outs = [f[2], f[1], f[0], 1];
    let mut inputs = f[3];
    for (i, &o) in outs.iter().enumerate() {
        let act = if i == 3 { Activation::Linear } else { Activation::LeakyRelu };
        layers.push(Layer::ConvT(Conv2dTranspose::new(store, &format!("dec_convt{}", i + 1), inputs, o, 2, rng)?, act));
        inputs = o;
    }
    layers.push(Layer::Reshape(vec![dims.patch, dims.patch]));
    Ok(layers)
}

/// Builds the layer stack of `arch`, registering its parameters in `store`.
pub fn build_body<T: Real>(arch: &ModelArch, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Body> {
    arch.validate()?;
    let d = &arch.dims;
    let p = d.patch;
    Ok(match arch.variant {
        Variant::Cjm | Variant::Cjmnlb | Variant::Cjmdd => {
            let mut layers = encoder_convs(store, d, arch.variant == Variant::Cjmnlb, rng)?;
            layers.push(Layer::Reshape(vec![d.flat()]));
            layers.push(Layer::Dense(Dense::new(store, "enc_dense", d.flat(), d.latent, true, rng)?, Activation::LeakyRelu));
            layers.push(Layer::Reshape(vec![arch.ell, d.latent]));
            layers.push(Layer::Lstm(Lstm::new(store, "lstm1", d.latent, d.lstm_units, true, rng)?));
            layers.push(Layer::Lstm(Lstm::new(store, "lstm2", d.lstm_units, d.lstm_units, false, rng)?));
            if arch.variant == Variant::Cjmdd {
                layers.push(Layer::Dense(
                    Dense::new(store, "lstm_out", d.lstm_units, d.latent, true, rng)?,
                    Activation::Linear,
                ));
                layers.extend(conv_decoder(store, d, rng)?);
            } else {
                layers.push(Layer::Dense(Dense::new(store, "out_dense", d.lstm_units, p * p, true, rng)?, Activation::Linear));
                layers.push(Layer::Reshape(vec![p, p]));
            }
            Body::Joint(Sequential::new(layers))
        }
        Variant::Kae => {
            let mut enc = encoder_convs(store, d, false, rng)?;
            enc.push(Layer::Reshape(vec![arch.ell * d.flat()]));
            enc.push(Layer::Dense(Dense::new(store, "enc_dense", arch.ell * d.flat(), d.latent, true, rng)?, Activation::Linear));
            let k = Dense::new(store, "koopman", d.latent, d.latent, false, rng)?;
            *store.value_mut(k.w) = koopman_rotation_blocks(d.latent, &rotation_angles(d.latent)?)?;
            let decoder = Sequential::new(conv_decoder(store, d, rng)?);
            Body::Koopman { encoder: Sequential::new(enc), k, decoder }
        }
        Variant::Unfilter => {
            let mut layers = vec![Layer::Reshape(vec![p, p, 1])];
            let mut inputs = 1;
            for (i, &f) in d.unfilter_filters.iter().chain(std::iter::once(&1)).enumerate() {
                let act = if i == 3 { Activation::Linear } else { Activation::LeakyRelu };
                layers.push(Layer::Conv(Conv2d::new(store, &format!("unfilter_conv{}", i + 1), inputs, f, 1, rng)?, act));
                inputs = f;
            }
            layers.push(Layer::Reshape(vec![p, p]));
            Body::Unfilter(Sequential::new(layers))
        }
    })
}

impl Body {
    pub fn param_count(&self) -> usize {
        match self {
            Body::Joint(s) | Body::Unfilter(s) => s.param_count(),
            Body::Koopman { encoder, k, decoder } => encoder.param_count() + k.param_count() + decoder.param_count(),
        }
    }
}
