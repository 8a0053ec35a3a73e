use super::act::sigmoid;
use super::init::{forget_bias_one, glorot_uniform, orthogonal};
use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};
use super::Rng;
use crate::error::{Error, Result};

/// LSTM over `[batch, time, inputs]` with gates grouped as (input, forget,
/// candidate, output), one fused bias of length `4 units`, zero initial
/// state. Kernel `[inputs, 4 units]`, recurrent kernel `[units, 4 units]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub name: String,
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub units: usize,
    pub return_sequences: bool,
}

/// Per-step activations kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCache<T> {
    /// Gate activations `[time][batch, 4 units]`.
    gates: Vec<Vec<T>>,
    /// Cell and hidden states after each step, `[time][batch, units]`.
    c: Vec<Vec<T>>,
    h: Vec<Vec<T>>,
    steps: Vec<Vec<T>>,
    batch: usize,
}

impl Lstm {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        units: usize,
        return_sequences: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w = store.add(format!("{name}/kernel"), glorot_uniform(&[inputs, 4 * units], inputs, 4 * units, rng))?;
        let u = store.add(format!("{name}/recurrent_kernel"), orthogonal(units, 4 * units, rng))?;
        let mut bias = Tensor::zeros(&[4 * units]);
        forget_bias_one(&mut bias);
        let b = store.add(format!("{name}/bias"), bias)?;
        Ok(Self { name: name.to_string(), w, u, b, inputs, units, return_sequences })
    }

    pub fn param_count(&self) -> usize {
        4 * self.units * (self.inputs + self.units + 1)
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        let (nb, nt) = match x.shape[..] {
            [b, t, m] if m == self.inputs && t >= 1 => (b, t),
            _ => return Err(Error::shape(&self.name, format!("expected [batch, time>=1, {}], got {:?}", self.inputs, x.shape))),
        };
        let (n, m) = (self.units, self.inputs);
        let (w, u, b) = (&store.value(self.w).data, &store.value(self.u).data, &store.value(self.b).data);
        let mut cache = LstmCache { gates: vec![], c: vec![], h: vec![], steps: vec![], batch: nb };
        let mut h_prev = vec![T::zero(); nb * n];
        let mut c_prev = vec![T::zero(); nb * n];
        for t in 0..nt {
            let mut xt = Vec::with_capacity(nb * m);
            for bi in 0..nb {
                xt.extend_from_slice(&x.data[(bi * nt + t) * m..(bi * nt + t + 1) * m]);
            }
            let mut z: Vec<T> = (0..nb).flat_map(|_| b.iter().copied()).collect();
            matmul_acc(&xt, w, &mut z, nb, m, 4 * n);
            matmul_acc(&h_prev, u, &mut z, nb, n, 4 * n);
            let mut c = vec![T::zero(); nb * n];
            let mut h = vec![T::zero(); nb * n];
            for bi in 0..nb {
                let zr = &mut z[bi * 4 * n..(bi + 1) * 4 * n];
                for j in 0..n {
                    let (i_g, f_g, g_g, o_g) =
                        (sigmoid(zr[j]), sigmoid(zr[n + j]), zr[2 * n + j].tanh(), sigmoid(zr[3 * n + j]));
                    zr[j] = i_g;
                    zr[n + j] = f_g;
                    zr[2 * n + j] = g_g;
                    zr[3 * n + j] = o_g;
                    let cv = f_g * c_prev[bi * n + j] + i_g * g_g;
                    c[bi * n + j] = cv;
                    h[bi * n + j] = o_g * cv.tanh();
                }
            }
            cache.gates.push(z);
            cache.steps.push(xt);
            c_prev.clone_from(&c);
            h_prev.clone_from(&h);
            cache.c.push(c);
            cache.h.push(h);
        }
        let y = if self.return_sequences {
            let mut data = vec![T::zero(); nb * nt * n];
            for t in 0..nt {
                for bi in 0..nb {
                    data[(bi * nt + t) * n..(bi * nt + t + 1) * n].copy_from_slice(&cache.h[t][bi * n..(bi + 1) * n]);
                }
            }
            Tensor { shape: vec![nb, nt, n], data }
        } else {
            Tensor { shape: vec![nb, n], data: cache.h[nt - 1].clone() }
        };
        Ok((y, cache))
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, cache: &LstmCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (n, m, nb, nt) = (self.units, self.inputs, cache.batch, cache.gates.len());
        let mut dx = Tensor::zeros(&[nb, nt, m]);
        let mut dh_next = vec![T::zero(); nb * n];
        let mut dc_next = vec![T::zero(); nb * n];
        let mut dw = vec![T::zero(); m * 4 * n];
        let mut du = vec![T::zero(); n * 4 * n];
        let mut db = vec![T::zero(); 4 * n];
        let zero = vec![T::zero(); nb * n];
        for t in (0..nt).rev() {
            let mut dh = dh_next.clone();
            if self.return_sequences {
                for bi in 0..nb {
                    for j in 0..n {
                        dh[bi * n + j] += dy.data[(bi * nt + t) * n + j];
                    }
                }
            } else if t == nt - 1 {
                for (a, &g) in dh.iter_mut().zip(&dy.data) {
                    *a += g;
                }
            }
            let gates = &cache.gates[t];
            let c_prev = if t > 0 { &cache.c[t - 1] } else { &zero };
            let h_prev = if t > 0 { &cache.h[t - 1] } else { &zero };
            let mut dz = vec![T::zero(); nb * 4 * n];
            for bi in 0..nb {
                let g = &gates[bi * 4 * n..(bi + 1) * 4 * n];
                for j in 0..n {
                    let k = bi * n + j;
                    let (i_g, f_g, g_g, o_g) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                    let tc = cache.c[t][k].tanh();
                    let d_o = dh[k] * tc;
                    let dc = dh[k] * o_g * (T::one() - tc * tc) + dc_next[k];
                    let zr = &mut dz[bi * 4 * n..(bi + 1) * 4 * n];
                    zr[j] = dc * g_g * i_g * (T::one() - i_g);
                    zr[n + j] = dc * c_prev[k] * f_g * (T::one() - f_g);
                    zr[2 * n + j] = dc * i_g * (T::one() - g_g * g_g);
                    zr[3 * n + j] = d_o * o_g * (T::one() - o_g);
                    dc_next[k] = dc * f_g;
                }
            }
            matmul_at_acc(&cache.steps[t], &dz, &mut dw, nb, m, 4 * n);
            matmul_at_acc(h_prev, &dz, &mut du, nb, n, 4 * n);
            for row in dz.chunks(4 * n) {
                for (a, &v) in db.iter_mut().zip(row) {
                    *a += v;
                }
            }
            let mut dxt = vec![T::zero(); nb * m];
            matmul_bt_acc(&dz, &store.value(self.w).data, &mut dxt, nb, 4 * n, m);
            for bi in 0..nb {
                dx.data[(bi * nt + t) * m..(bi * nt + t + 1) * m].copy_from_slice(&dxt[bi * m..(bi + 1) * m]);
            }
            dh_next = vec![T::zero(); nb * n];
            matmul_bt_acc(&dz, &store.value(self.u).data, &mut dh_next, nb, 4 * n, n);
        }
        for (id, g) in [(self.w, dw), (self.u, du), (self.b, db)] {
            for (a, v) in store.grad_mut(id).data.iter_mut().zip(g) {
                *a += v;
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rng;

    #[test]
    fn zero_weights_give_zero_state() {
        let mut s = ParamStore::<f64>::new();
        let l = Lstm::new(&mut s, "l", 3, 4, true, &mut rng(0)).unwrap();
        s.value_mut(l.w).data.iter_mut().for_each(|v| *v = 0.0);
        s.value_mut(l.u).data.iter_mut().for_each(|v| *v = 0.0);
        let x = Tensor::new(&[2, 5, 3], (0..30).map(|v| v as f64 * 0.3 - 2.0).collect()).unwrap();
        let (y, _) = l.forward(&s, &x).unwrap();
        assert_eq!(y.shape, vec![2, 5, 4]);
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_count() {
        let mut s = ParamStore::<f32>::new();
        let l = Lstm::new(&mut s, "l", 10, 100, false, &mut rng(0)).unwrap();
        assert_eq!(l.param_count(), 44_400);
        assert_eq!(s.count(), 44_400);
    }

    #[test]
    fn last_state_equals_last_sequence_entry() {
        let mut s = ParamStore::<f64>::new();
        let mut r = rng(2);
        let a = Lstm::new(&mut s, "a", 3, 4, true, &mut r).unwrap();
        let b = Lstm { return_sequences: false, ..a.clone() };
        let x: Tensor<f64> = glorot_uniform(&[2, 3, 3], 1, 1, &mut r);
        let (ys, _) = a.forward(&s, &x).unwrap();
        let (yl, _) = b.forward(&s, &x).unwrap();
        for bi in 0..2 {
            assert_eq!(&ys.data[(bi * 3 + 2) * 4..(bi * 3 + 3) * 4], &yl.data[bi * 4..(bi + 1) * 4]);
        }
    }
}
