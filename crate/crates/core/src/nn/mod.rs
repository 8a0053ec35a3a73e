//! Small dense-tensor toolkit with hand-written forward and backward passes
//! for the layers the surrogates use, initializers, Adam and checkpoints.
//!
//! Random streams come from ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`, which is platform independent.

mod act;
mod adam;
mod checkpoint;
mod conv;
mod dense;
pub mod gradcheck;
mod init;
mod lstm;
mod nonlocal;
mod params;
mod seq;
mod tensor;

pub use act::{leaky_relu, sigmoid, softmax_rows, Activation, LEAKY_SLOPE};
pub use adam::{adam_step, Adam};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, DKPT_MAGIC, DKPT_VERSION};
pub use conv::{same_padding, Conv2d, Conv2dTranspose};
pub use dense::Dense;
pub use init::{forget_bias_one, glorot_uniform, koopman_rotation_blocks, orthogonal, rotation_angles};
pub use lstm::Lstm;
pub use nonlocal::NonLocal;
pub use params::{Param, ParamId, ParamStore};
pub use seq::{Cache, Layer, Sequential};
pub use tensor::{Real, Tensor};

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
