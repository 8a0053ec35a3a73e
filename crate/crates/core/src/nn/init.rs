use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::{Real, Tensor};
use super::Rng;
use crate::error::{Error, Result};

/// Uniform on `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor { shape: shape.to_vec(), data: (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect() }
}

/// `rows x cols` matrix with orthonormal columns (or rows, when wide), from
/// the QR factorization of a standard normal matrix with the signs fixed so
/// that R has a positive diagonal.
pub fn orthogonal<T: Real>(rows: usize, cols: usize, rng: &mut Rng) -> Tensor<T> {
    let (r, c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let rd = qr.r();
    for j in 0..c {
        if rd[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    Tensor { shape: vec![rows, cols], data: (0..rows * cols).map(|k| T::of(m[(k / cols, k % cols)])).collect() }
}

/// Sets the forget-gate slice `[n, 2n)` of a fused LSTM bias to one.
pub fn forget_bias_one<T: Real>(bias: &mut Tensor<T>) {
    let n = bias.len() / 4;
    bias.data[n..2 * n].iter_mut().for_each(|b| *b = T::one());
}

/// Angles `(2j - 1) pi / m`, j = 1..m/2: together with their conjugates the
/// eigenvalues sit equidistantly on the unit circle.
pub fn rotation_angles(m: usize) -> Result<Vec<f64>> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::config(format!("rotation blocks need an even size, got {m}")));
    }
    Ok((1..=m / 2).map(|j| (2 * j - 1) as f64 * std::f64::consts::PI / m as f64).collect())
}

/// Block-diagonal `m x m` matrix of 2x2 rotations [[cos, sin], [-sin, cos]].
pub fn koopman_rotation_blocks<T: Real>(m: usize, angles: &[f64]) -> Result<Tensor<T>> {
    if m % 2 != 0 || angles.len() != m / 2 {
        return Err(Error::config(format!("{m}x{m} rotation blocks need an even size and {} angles", m / 2)));
    }
    let mut k = Tensor::zeros(&[m, m]);
    for (j, &phi) in angles.iter().enumerate() {
        let (s, c) = phi.sin_cos();
        let i = 2 * j;
        k.data[i * m + i] = T::of(c);
        k.data[i * m + i + 1] = T::of(s);
        k.data[(i + 1) * m + i] = T::of(-s);
        k.data[(i + 1) * m + i + 1] = T::of(c);
    }
    Ok(k)
}
