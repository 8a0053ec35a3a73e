use super::init::glorot_uniform;
use super::params::{ParamId, ParamStore};
use super::tensor::{Real, Tensor};
use super::Rng;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;

/// SAME padding for a length-`n` input: output `ceil(n / s)` and the padding
/// before the first element (the smaller half of the total).
pub fn same_padding(n: usize, k: usize, s: usize) -> (usize, usize) {
    let out = n.div_ceil(s);
    let total = ((out - 1) * s + k).saturating_sub(n);
    (out, total / 2)
}

/// Geometry of a strided 3x3 cross-correlation from `[b, h, w, ci]` to
/// `[b, ho, wo, co]`.
#[derive(Clone, Copy, Debug)]
struct Geom {
    b: usize,
    h: usize,
    w: usize,
    ci: usize,
    ho: usize,
    wo: usize,
    co: usize,
    s: usize,
    pt: usize,
    pl: usize,
}

impl Geom {
    fn new(b: usize, h: usize, w: usize, ci: usize, co: usize, s: usize) -> Self {
        let (ho, pt) = same_padding(h, KERNEL, s);
        let (wo, pl) = same_padding(w, KERNEL, s);
        Self { b, h, w, ci, ho, wo, co, s, pt, pl }
    }

    /// Calls `f(x_offset, w_offset, y_offset)` for every valid tap.
    #[inline]
    fn taps(&self, mut f: impl FnMut(usize, usize, usize)) {
        for b in 0..self.b {
            for oh in 0..self.ho {
                for ow in 0..self.wo {
                    let y_off = ((b * self.ho + oh) * self.wo + ow) * self.co;
                    for kh in 0..KERNEL {
                        let ih = (oh * self.s + kh) as isize - self.pt as isize;
                        if ih < 0 || ih >= self.h as isize {
                            continue;
                        }
                        for kw in 0..KERNEL {
                            let iw = (ow * self.s + kw) as isize - self.pl as isize;
                            if iw < 0 || iw >= self.w as isize {
                                continue;
                            }
                            let x_off = ((b * self.h + ih as usize) * self.w + iw as usize) * self.ci;
                            let w_off = (kh * KERNEL + kw) * self.ci * self.co;
                            f(x_off, w_off, y_off);
                        }
                    }
                }
            }
        }
    }

    fn forward<T: Real>(&self, x: &[T], w: &[T], y: &mut [T]) {
        let (ci, co) = (self.ci, self.co);
        self.taps(|xo, wo, yo| {
            let out = &mut y[yo..yo + co];
            for c in 0..ci {
                let xv = x[xo + c];
                if xv == T::zero() {
                    continue;
                }
                let wr = &w[wo + c * co..wo + (c + 1) * co];
                for (o, &wv) in out.iter_mut().zip(wr) {
                    *o += xv * wv;
                }
            }
        });
    }

    fn backward_data<T: Real>(&self, dy: &[T], w: &[T], dx: &mut [T]) {
        let (ci, co) = (self.ci, self.co);
        self.taps(|xo, wo, yo| {
            let g = &dy[yo..yo + co];
            for c in 0..ci {
                let wr = &w[wo + c * co..wo + (c + 1) * co];
                let mut s = T::zero();
                for (&wv, &gv) in wr.iter().zip(g) {
                    s += wv * gv;
                }
                dx[xo + c] += s;
            }
        });
    }

    fn backward_filter<T: Real>(&self, x: &[T], dy: &[T], dw: &mut [T]) {
        let (ci, co) = (self.ci, self.co);
        self.taps(|xo, wo, yo| {
            let g = &dy[yo..yo + co];
            for c in 0..ci {
                let xv = x[xo + c];
                if xv == T::zero() {
                    continue;
                }
                let dr = &mut dw[wo + c * co..wo + (c + 1) * co];
                for (d, &gv) in dr.iter_mut().zip(g) {
                    *d += xv * gv;
                }
            }
        });
    }
}

fn image_dims<T: Real>(name: &str, x: &Tensor<T>, channels: usize) -> Result<(usize, usize, usize)> {
    match x.shape[..] {
        [b, h, w, c] if c == channels && h > 0 && w > 0 => Ok((b, h, w)),
        _ => Err(Error::shape(name, format!("expected [batch, h, w, {channels}], got {:?}", x.shape))),
    }
}

fn add_bias<T: Real>(y: &mut [T], b: &[T]) {
    for px in y.chunks_mut(b.len()) {
        for (v, &bv) in px.iter_mut().zip(b) {
            *v += bv;
        }
    }
}

fn bias_grad<T: Real>(dy: &[T], db: &mut [T]) {
    let n = db.len();
    for px in dy.chunks(n) {
        for (g, &d) in db.iter_mut().zip(px) {
            *g += d;
        }
    }
}

/// 3x3 convolution with stride and SAME padding; kernel `[3, 3, in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub name: String,
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub filters: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        filters: usize,
        stride: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let k2 = KERNEL * KERNEL;
        let w = store.add(
            format!("{name}/kernel"),
            glorot_uniform(&[KERNEL, KERNEL, inputs, filters], k2 * inputs, k2 * filters, rng),
        )?;
        let b = store.add(format!("{name}/bias"), Tensor::zeros(&[filters]))?;
        Ok(Self { name: name.to_string(), w, b, inputs, filters, stride })
    }

    pub fn param_count(&self) -> usize {
        KERNEL * KERNEL * self.inputs * self.filters + self.filters
    }

    fn geom<T: Real>(&self, x: &Tensor<T>) -> Result<Geom> {
        let (b, h, w) = image_dims(&self.name, x, self.inputs)?;
        Ok(Geom::new(b, h, w, self.inputs, self.filters, self.stride))
    }

    pub fn output_shape(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.stride), w.div_ceil(self.stride))
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geom(x)?;
        let mut y = Tensor::zeros(&[g.b, g.ho, g.wo, g.co]);
        add_bias(&mut y.data, &store.value(self.b).data);
        g.forward(&x.data, &store.value(self.w).data, &mut y.data);
        Ok(y)
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geom(x)?;
        bias_grad(&dy.data, &mut store.grad_mut(self.b).data);
        g.backward_filter(&x.data, &dy.data, &mut store.grad_mut(self.w).data);
        let mut dx = Tensor::zeros(&x.shape);
        g.backward_data(&dy.data, &store.value(self.w).data, &mut dx.data);
        Ok(dx)
    }
}

/// Transposed 3x3 convolution: the adjoint of the strided SAME convolution
/// from `s`-times larger maps, so the output is `[b, h s, w s, filters]`.
/// Kernel `[3, 3, filters, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dTranspose {
    pub name: String,
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub filters: usize,
    pub stride: usize,
}

impl Conv2dTranspose {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        filters: usize,
        stride: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let k2 = KERNEL * KERNEL;
        let w = store.add(
            format!("{name}/kernel"),
            glorot_uniform(&[KERNEL, KERNEL, filters, inputs], k2 * filters, k2 * inputs, rng),
        )?;
        let b = store.add(format!("{name}/bias"), Tensor::zeros(&[filters]))?;
        Ok(Self { name: name.to_string(), w, b, inputs, filters, stride })
    }

    pub fn param_count(&self) -> usize {
        KERNEL * KERNEL * self.inputs * self.filters + self.filters
    }

    /// The forward convolution this layer is the adjoint of.
    fn geom<T: Real>(&self, x: &Tensor<T>) -> Result<Geom> {
        let (b, h, w) = image_dims(&self.name, x, self.inputs)?;
        Ok(Geom::new(b, h * self.stride, w * self.stride, self.filters, self.inputs, self.stride))
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geom(x)?;
        let mut y = Tensor::zeros(&[g.b, g.h, g.w, self.filters]);
        add_bias(&mut y.data, &store.value(self.b).data);
        g.backward_data(&x.data, &store.value(self.w).data, &mut y.data);
        Ok(y)
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geom(x)?;
        bias_grad(&dy.data, &mut store.grad_mut(self.b).data);
        g.backward_filter(&dy.data, &x.data, &mut store.grad_mut(self.w).data);
        let mut dx = Tensor::zeros(&x.shape);
        g.forward(&dy.data, &store.value(self.w).data, &mut dx.data);
        Ok(dx)
    }
}
