//! Central-difference checks of analytic gradients in double precision.

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::Result;

/// Maximum relative error between analytic and central-difference gradients
/// of the scalar `loss = <f(x), probe>` with respect to every parameter and
/// the input. `run` returns the forward output and, given the upstream
/// gradient, fills parameter gradients and returns the input gradient.
pub fn grad_check<F, B>(store: &mut ParamStore<f64>, x: &Tensor<f64>, h: f64, forward: F, backward: B) -> Result<f64>
where
    F: Fn(&ParamStore<f64>, &Tensor<f64>) -> Result<Tensor<f64>>,
    B: Fn(&mut ParamStore<f64>, &Tensor<f64>, &Tensor<f64>) -> Result<Tensor<f64>>,
{
    let y = forward(store, x)?;
    // fixed, non-symmetric probe so that every output entry matters
    let probe = Tensor { shape: y.shape.clone(), data: (0..y.len()).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect() };
    let loss = |s: &ParamStore<f64>, x: &Tensor<f64>| -> Result<f64> { Ok(forward(s, x)?.dot(&probe)) };
    store.zero_grads();
    let dx = backward(store, x, &probe)?;
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs()).max(1e-2);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for k in 0..store.len() {
        let id = super::params::ParamId(k);
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data[i];
            store.value_mut(id).data[i] = orig + h;
            let lp = loss(store, x)?;
            store.value_mut(id).data[i] = orig - h;
            let lm = loss(store, x)?;
            store.value_mut(id).data[i] = orig;
            compare(store.grad(id).data[i], (lp - lm) / (2.0 * h));
        }
    }
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = x.data[i];
        xp.data[i] = orig + h;
        let lp = loss(store, &xp)?;
        xp.data[i] = orig - h;
        let lm = loss(store, &xp)?;
        xp.data[i] = orig;
        compare(dx.data[i], (lp - lm) / (2.0 * h));
    }
    Ok(worst)
}

/// Gradient check of a layer stack.
pub fn check_sequential(store: &mut ParamStore<f64>, net: &super::Sequential, x: &Tensor<f64>, h: f64) -> Result<f64> {
    grad_check(
        store,
        x,
        h,
        |s, x| net.infer(s, x.clone()),
        |s, x, dy| {
            let (_, caches) = net.forward(s, x.clone())?;
            net.backward(s, &caches, dy.clone())
        },
    )
}

/// Small instances of every layer type with their finite-difference error
/// and the tolerance that applies to them.
pub fn layer_checks(seed: u64) -> Result<Vec<(&'static str, f64, f64)>> {
    use super::{glorot_uniform, rng, Activation, Conv2d, Conv2dTranspose, Dense, Layer, Lstm, NonLocal, Sequential};
    let mut r = rng(seed);
    let mut out = Vec::new();
    let h = 1e-5;
    let mut run = |name: &'static str, tol: f64, build: &dyn Fn(&mut ParamStore<f64>, &mut super::Rng) -> Result<(Sequential, Vec<usize>)>| -> Result<()> {
        let mut store = ParamStore::new();
        let (net, shape) = build(&mut store, &mut r)?;
        // nudge biases off zero so their gradients are exercised
        for p in store.params_mut() {
            if p.name.ends_with("/bias") {
                p.value.data.iter_mut().enumerate().for_each(|(i, v)| *v += 0.05 * ((i % 5) as f64 - 2.0));
            }
        }
        let x = glorot_uniform(&shape, 1, 1, &mut r);
        out.push((name, check_sequential(&mut store, &net, &x, h)?, tol));
        Ok(())
    };
    run("dense", 1e-6, &|s, r| {
        Ok((Sequential::new(vec![Layer::Dense(Dense::new(s, "d", 5, 4, true, r)?, Activation::Linear)]), vec![3, 5]))
    })?;
    run("dense_no_bias", 1e-6, &|s, r| {
        Ok((Sequential::new(vec![Layer::Dense(Dense::new(s, "k", 4, 4, false, r)?, Activation::Linear)]), vec![2, 4]))
    })?;
    run("conv2d_stride2", 1e-6, &|s, r| {
        Ok((Sequential::new(vec![Layer::Conv(Conv2d::new(s, "c", 2, 3, 2, r)?, Activation::Linear)]), vec![2, 6, 5, 2]))
    })?;
    run("conv2d_stride1", 1e-6, &|s, r| {
        Ok((Sequential::new(vec![Layer::Conv(Conv2d::new(s, "c", 2, 2, 1, r)?, Activation::Linear)]), vec![1, 4, 4, 2]))
    })?;
    run("conv2d_transpose", 1e-6, &|s, r| {
        Ok((
            Sequential::new(vec![Layer::ConvT(Conv2dTranspose::new(s, "t", 3, 2, 2, r)?, Activation::Linear)]),
            vec![2, 3, 4, 3],
        ))
    })?;
    for (name, act) in [("leaky_relu", Activation::LeakyRelu), ("tanh", Activation::Tanh), ("sigmoid", Activation::Sigmoid)] {
        run(name, 1e-5, &move |s, r| {
            Ok((Sequential::new(vec![Layer::Dense(Dense::new(s, "d", 4, 6, true, r)?, act)]), vec![3, 4]))
        })?;
    }
    run("lstm_sequences", 1e-5, &|s, r| Ok((Sequential::new(vec![Layer::Lstm(Lstm::new(s, "l", 3, 4, true, r)?)]), vec![2, 3, 3])))?;
    run("lstm_last", 1e-5, &|s, r| Ok((Sequential::new(vec![Layer::Lstm(Lstm::new(s, "l", 3, 5, false, r)?)]), vec![2, 3, 3])))?;
    run("nonlocal_softmax", 1e-5, &|s, r| {
        Ok((Sequential::new(vec![Layer::NonLocal(NonLocal::new(s, "n", 4, r)?)]), vec![2, 3, 2, 4]))
    })?;
    run("stack", 1e-5, &|s, r| {
        Ok((
            Sequential::new(vec![
                Layer::Reshape(vec![4, 4, 1]),
                Layer::Conv(Conv2d::new(s, "c", 1, 2, 2, r)?, Activation::LeakyRelu),
                Layer::Reshape(vec![8]),
                Layer::Dense(Dense::new(s, "e", 8, 3, true, r)?, Activation::LeakyRelu),
                Layer::Reshape(vec![2, 3]),
                Layer::Lstm(Lstm::new(s, "l", 3, 4, false, r)?),
                Layer::Dense(Dense::new(s, "o", 4, 8, true, r)?, Activation::Linear),
                Layer::Reshape(vec![2, 2, 2]),
                Layer::ConvT(Conv2dTranspose::new(s, "t", 2, 1, 2, r)?, Activation::Linear),
            ]),
            vec![2, 2, 4, 4, 1],
        ))
    })?;
    Ok(out)
}
