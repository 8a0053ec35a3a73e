use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::of(LEAKY_SLOPE) * x
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::LeakyRelu => leaky_relu(x),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    pub fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::LeakyRelu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(LEAKY_SLOPE)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn forward<T: Real>(self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| self.apply(v))
    }

    pub fn backward<T: Real>(self, x: &Tensor<T>, y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let data = x.data.iter().zip(&y.data).zip(&dy.data).map(|((&a, &b), &g)| g * self.derivative(a, b)).collect();
        Tensor { shape: x.shape.clone(), data }
    }
}

/// Softmax over consecutive rows of length `n`, max-shifted.
pub fn softmax_rows<T: Real>(x: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(n) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = row.iter().map(|&v| (v - mx).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}

/// Gradient through row softmax given its output `a` and upstream `da`.
pub(crate) fn softmax_rows_backward<T: Real>(a: &[T], da: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len());
    for (ar, gr) in a.chunks(n).zip(da.chunks(n)) {
        let dot: T = ar.iter().zip(gr).map(|(&p, &g)| p * g).sum();
        out.extend(ar.iter().zip(gr).map(|(&p, &g)| p * (g - dot)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_values() {
        assert_eq!(leaky_relu(-2.0f64), -0.02);
        assert_eq!(leaky_relu(3.0f64), 3.0);
    }

    #[test]
    fn softmax_uniform_and_shift_invariant() {
        let s = softmax_rows(&[0.7f64; 5], 5);
        assert!(s.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let x = [0.3f64, -1.2, 2.5, 0.0];
        let a = softmax_rows(&x, 4);
        let b = softmax_rows(&x.map(|v| v + 40.0), 4);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn activation_derivatives_match_differences() {
        let h = 1e-6;
        for act in [Activation::LeakyRelu, Activation::Tanh, Activation::Sigmoid, Activation::Linear] {
            for x in [-1.3f64, -0.2, 0.4, 2.2] {
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                let an = act.derivative(x, act.apply(x));
                assert!((fd - an).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn softmax_backward_matches_differences() {
        let x = [0.3f64, -1.2, 2.5, 0.0, 0.9, 0.1];
        let g = [0.5f64, -0.3, 0.2, 1.0, -0.7, 0.4];
        let a = softmax_rows(&x, 3);
        let an = softmax_rows_backward(&a, &g, 3);
        let f = |x: &[f64]| softmax_rows(x, 3).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..6 {
            let mut p = x;
            p[i] += 1e-6;
            let mut m = x;
            m[i] -= 1e-6;
            assert!(((f(&p) - f(&m)) / 2e-6 - an[i]).abs() < 1e-9);
        }
    }
}
