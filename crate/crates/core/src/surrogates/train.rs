use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::arch::{Body, Variant};
use super::Surrogate;
use crate::dataset::{gaussian_blur3, normalize, CaseRecord};
use crate::error::{Error, Result};
use crate::nn::{self, adam_step, Adam, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KaeWeights {
    pub reconst: f64,
    pub predict: f64,
    pub linear: f64,
    /// Epochs at the start during which the linearity term is left out.
    pub warmup_epochs: usize,
}

impl Default for KaeWeights {
    fn default() -> Self {
        Self { reconst: 1.0, predict: 1.0, linear: 0.01, warmup_epochs: 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    #[serde(default)]
    pub adam: Adam,
    pub seed: u64,
    #[serde(default)]
    pub kae: KaeWeights,
}

impl TrainConfig {
    /// Default schedule for each variant.
    pub fn for_variant(variant: Variant, seed: u64) -> Self {
        let (epochs, batch) = match variant {
            Variant::Kae => (150, 128),
            Variant::Unfilter => (50, 64),
            _ => (500, 128),
        };
        Self { epochs, batch, adam: Adam::default(), seed, kae: KaeWeights::default() }
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::config("epochs and batch must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        let k = &self.kae;
        if [k.reconst, k.predict, k.linear].iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        if variant == Variant::Kae && k.warmup_epochs >= self.epochs {
            return Err(Error::config(format!("warmup {} must be below epochs {}", k.warmup_epochs, self.epochs)));
        }
        Ok(())
    }
}

/// Weighted loss and its unweighted parts (the parts are zero for the
/// single-term losses except `predict`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub reconst: f64,
    pub predict: f64,
    pub linear: f64,
}

impl LossParts {
    fn add_scaled(&mut self, o: &LossParts, s: f64) {
        self.total += o.total * s;
        self.reconst += o.reconst * s;
        self.predict += o.predict * s;
        self.linear += o.linear * s;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossParts,
    pub val: Option<LossParts>,
    pub wall_s: f64,
    /// Mean over latent dimensions of the per-dimension standard deviation
    /// on the monitoring batch (KAE only).
    pub latent_std: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Epochs after warmup at which the latent spread fell below 1e-6.
    pub collapse_epochs: Vec<usize>,
}

impl TrainReport {
    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.train.total)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train.total)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,wall_s,reconst,predict,linear,latent_std\n");
        for e in &self.epochs {
            let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:e},{},{:.3},{:e},{:e},{:e},{}",
                e.epoch,
                e.train.total,
                opt(e.val.map(|v| v.total)),
                e.wall_s,
                e.train.reconst,
                e.train.predict,
                e.train.linear,
                opt(e.latent_std)
            );
        }
        s
    }
}

pub const COLLAPSE_STD: f64 = 1e-6;
const MONITOR_BATCH: usize = 128;

fn normalized_frames(case: &CaseRecord, x_min: f64, x_max: f64) -> Result<Vec<Vec<f32>>> {
    case.frames
        .iter()
        .map(|f| {
            let mut v = f.data.clone();
            normalize(&mut v, x_min, x_max)?;
            Ok(v)
        })
        .collect()
}

/// All windows of `ell + 1` consecutive normalized frames over `cases`, as
/// `[n, ell + 1, h, w]`; a case with `n_t` frames gives `n_t - ell`.
pub fn sequence_samples(cases: &[CaseRecord], ell: usize, x_min: f64, x_max: f64) -> Result<Tensor<f32>> {
    let shape = cases.iter().find_map(|c| c.shape()).ok_or_else(|| Error::config("no frames to train on"))?;
    let mut data = Vec::new();
    let mut n = 0;
    for case in cases {
        if case.shape().is_some_and(|s| s != shape) {
            return Err(Error::config(format!("mixed frame shapes {:?} and {shape:?}", case.shape())));
        }
        let frames = normalized_frames(case, x_min, x_max)?;
        for w in frames.windows(ell + 1) {
            w.iter().for_each(|f| data.extend_from_slice(f));
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::config(format!("no case has more than {ell} frames")));
    }
    Tensor::new(&[n, ell + 1, shape.0, shape.1], data)
}

/// Normalized (blurred, unblurred) frame pairs `[n, h, w]` for the unfilter
/// network. `cases` hold unblurred frames.
pub fn unfilter_pairs(cases: &[CaseRecord], x_min: f64, x_max: f64) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let shape = cases.iter().find_map(|c| c.shape()).ok_or_else(|| Error::config("no frames to train on"))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut n = 0;
    for f in cases.iter().flat_map(|c| &c.frames) {
        if (f.h, f.w) != shape {
            return Err(Error::config(format!("mixed frame shapes {:?} and {shape:?}", (f.h, f.w))));
        }
        let mut b = gaussian_blur3(f).data;
        let mut u = f.data.clone();
        normalize(&mut b, x_min, x_max)?;
        normalize(&mut u, x_min, x_max)?;
        xs.extend(b);
        ys.extend(u);
        n += 1;
    }
    Ok((Tensor::new(&[n, shape.0, shape.1], xs)?, Tensor::new(&[n, shape.0, shape.1], ys)?))
}

fn mse<T: Real>(y: &Tensor<T>, target: &Tensor<T>) -> (f64, Tensor<T>) {
    let n = y.len() as f64;
    let mut grad = Tensor::zeros(&y.shape);
    let mut acc = 0.0;
    for ((g, &a), &b) in grad.data.iter_mut().zip(&y.data).zip(&target.data) {
        let d = a.as_f64() - b.as_f64();
        acc += d * d;
        *g = T::of(2.0 * d / n);
    }
    (acc / n, grad)
}

fn scale<T: Real>(t: &mut Tensor<T>, s: f64) {
    let s = T::of(s);
    t.data.iter_mut().for_each(|v| *v *= s);
}

/// Frames `[a, b)` of every sequence in `[n, l, h, w]`.
fn frames<T: Real>(seq: &Tensor<T>, a: usize, b: usize) -> Tensor<T> {
    let (n, l) = (seq.shape[0], seq.shape[1]);
    let f: usize = seq.shape[2..].iter().product();
    let mut data = Vec::with_capacity(n * (b - a) * f);
    for i in 0..n {
        data.extend_from_slice(&seq.data[(i * l + a) * f..(i * l + b) * f]);
    }
    let mut shape = seq.shape.clone();
    shape[1] = b - a;
    Tensor { shape, data }
}

fn squeeze1<T: Real>(t: Tensor<T>) -> Tensor<T> {
    let mut shape = t.shape.clone();
    shape.remove(1);
    Tensor { shape, data: t.data }
}

/// Task a batch is drawn from.
enum Task<'a, T> {
    Sequences(&'a Tensor<T>),
    Pairs(&'a Tensor<T>, &'a Tensor<T>),
}

impl<T: Real> Task<'_, T> {
    fn len(&self) -> usize {
        match self {
            Task::Sequences(s) => s.batch(),
            Task::Pairs(x, _) => x.batch(),
        }
    }
}

impl<T: Real> Surrogate<T> {
    /// Loss on a batch of `[n, ell + 1, h, w]` sequences with gradients
    /// accumulated into the store when `grad` is set. `linear` is the
    /// effective weight of the Koopman linearity term.
    pub fn sequence_loss(&mut self, batch: &Tensor<T>, weights: &KaeWeights, linear: f64, grad: bool) -> Result<LossParts> {
        let ell = self.arch.ell;
        if batch.shape.len() != 4 || batch.shape[1] != ell + 1 {
            return Err(Error::shape(self.arch.variant.name(), format!("sequence batch {:?} for ell {ell}", batch.shape)));
        }
        let w0 = frames(batch, 0, ell);
        let next = squeeze1(frames(batch, ell, ell + 1));
        match &self.body {
            Body::Joint(net) => {
                self.check_window(&w0)?;
                let (y, caches) = net.forward(&self.store, w0)?;
                let (l, dy) = mse(&y, &next);
                if grad {
                    net.backward(&mut self.store, &caches, dy)?;
                }
                Ok(LossParts { total: l, predict: l, ..LossParts::default() })
            }
            Body::Koopman { encoder, k, decoder } => {
                self.check_window(&w0)?;
                let current = squeeze1(frames(batch, ell - 1, ell));
                let (z0, c_e0) = encoder.forward(&self.store, w0)?;
                let zk = k.forward(&self.store, &z0)?;
                let (r, c_r) = decoder.forward(&self.store, z0.clone())?;
                let (p, c_p) = decoder.forward(&self.store, zk.clone())?;
                let (lr, mut dr) = mse(&r, &current);
                let (lp, mut dp) = mse(&p, &next);
                let mut parts = LossParts { reconst: lr, predict: lp, ..LossParts::default() };
                let lin = if linear > 0.0 { Some(encoder.forward(&self.store, frames(batch, 1, ell + 1))?) } else { None };
                let mut dzk_lin = None;
                if let Some((z1, _)) = &lin {
                    let (ll, dzk) = mse(&zk, z1);
                    parts.linear = ll;
                    dzk_lin = Some(dzk);
                }
                parts.total = weights.reconst * lr + weights.predict * lp + linear * parts.linear;
                if grad {
                    scale(&mut dr, weights.reconst);
                    scale(&mut dp, weights.predict);
                    let mut dzk = decoder.backward(&mut self.store, &c_p, dp)?;
                    let mut dz0 = decoder.backward(&mut self.store, &c_r, dr)?;
                    if let (Some((_, c_e1)), Some(mut d)) = (&lin, dzk_lin) {
                        scale(&mut d, linear);
                        dzk.add_assign(&d);
                        // the target side receives the opposite gradient
                        encoder.backward(&mut self.store, c_e1, d.map(|v| -v))?;
                    }
                    dz0.add_assign(&k.backward(&mut self.store, &z0, &dzk));
                    encoder.backward(&mut self.store, &c_e0, dz0)?;
                }
                Ok(parts)
            }
            Body::Unfilter(_) => Err(Error::config("the unfilter network trains on frame pairs")),
        }
    }

    /// Per-dimension latent standard deviation averaged over dimensions.
    pub fn latent_spread(&self, windows: &Tensor<T>) -> Result<f64> {
        let z = self.encode(windows)?;
        let (n, d) = (z.batch(), z.row_len());
        let mut total = 0.0;
        for j in 0..d {
            let col: Vec<f64> = (0..n).map(|i| z.data[i * d + j].as_f64()).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            total += (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        }
        Ok(total / d as f64)
    }

    fn pair_loss(&mut self, x: &Tensor<T>, y: &Tensor<T>, grad: bool) -> Result<LossParts> {
        let Body::Unfilter(net) = &self.body else {
            return Err(Error::config(format!("{} trains on sequences", self.arch.variant.name())));
        };
        self.check_window(x)?;
        let (out, caches) = net.forward(&self.store, x.clone())?;
        let (l, dy) = mse(&out, y);
        if grad {
            net.backward(&mut self.store, &caches, dy)?;
        }
        Ok(LossParts { total: l, predict: l, ..LossParts::default() })
    }

    fn task_loss(&mut self, task: &Task<T>, idx: &[usize], cfg: &TrainConfig, linear: f64, grad: bool) -> Result<LossParts> {
        match task {
            Task::Sequences(s) => self.sequence_loss(&s.select(idx), &cfg.kae, linear, grad),
            Task::Pairs(x, y) => self.pair_loss(&x.select(idx), &y.select(idx), grad),
        }
    }

    fn evaluate(&mut self, task: &Task<T>, cfg: &TrainConfig, linear: f64) -> Result<LossParts> {
        let n = task.len();
        let mut acc = LossParts::default();
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(cfg.batch) {
            let l = self.task_loss(task, chunk, cfg, linear, false)?;
            acc.add_scaled(&l, chunk.len() as f64 / n as f64);
        }
        Ok(acc)
    }

    fn fit(&mut self, train: Task<T>, val: Option<Task<T>>, cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate(self.arch.variant)?;
        let n = train.len();
        if n == 0 {
            return Err(Error::config("empty training set"));
        }
        let kae = self.arch.variant == Variant::Kae;
        let monitor = match (&val, &train) {
            (Some(Task::Sequences(v)), _) if v.batch() > 0 => Some(frames(&v.rows(0, v.batch().min(MONITOR_BATCH)), 0, self.arch.ell)),
            (_, Task::Sequences(t)) => Some(frames(&t.rows(0, n.min(MONITOR_BATCH)), 0, self.arch.ell)),
            _ => None,
        };
        let mut rng = nn::rng(cfg.seed ^ 0x5eed_5eed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut report = TrainReport::default();
        let start = Instant::now();
        for epoch in 1..=cfg.epochs {
            let linear = if kae && epoch > cfg.kae.warmup_epochs { cfg.kae.linear } else { 0.0 };
            order.shuffle(&mut rng);
            let mut acc = LossParts::default();
            for chunk in order.chunks(cfg.batch) {
                self.store.zero_grads();
                let l = self.task_loss(&train, chunk, cfg, linear, true)?;
                if !l.total.is_finite() {
                    return Err(Error::NonFinite(format!("{} training loss at epoch {epoch}", self.arch.variant.name())));
                }
                adam_step(&mut self.store, &cfg.adam);
                acc.add_scaled(&l, chunk.len() as f64 / n as f64);
            }
            let val_loss = match &val {
                Some(v) if v.len() > 0 => Some(self.evaluate(v, cfg, linear)?),
                _ => None,
            };
            let latent_std = match (&monitor, kae) {
                (Some(m), true) => Some(self.latent_spread(m)?),
                _ => None,
            };
            if let Some(s) = latent_std {
                if epoch > cfg.kae.warmup_epochs && s < COLLAPSE_STD {
                    log::warn!("epoch {epoch}: latent spread {s:e} below {COLLAPSE_STD:e}, the encoder maps every input to nearly zero");
                    report.collapse_epochs.push(epoch);
                }
            }
            log::debug!("{} epoch {epoch}: loss {:e}", self.arch.variant.name(), acc.total);
            report.epochs.push(EpochLog {
                epoch,
                train: acc,
                val: val_loss,
                wall_s: start.elapsed().as_secs_f64(),
                latent_std,
            });
        }
        Ok(report)
    }
}

/// Trains a sequence model on `[n, ell + 1, h, w]` windows; `val` is only
/// monitored.
pub fn train<T: Real>(
    model: &mut Surrogate<T>,
    samples: &Tensor<T>,
    val: Option<&Tensor<T>>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if model.arch.variant == Variant::Unfilter {
        return Err(Error::config("use train_unfilter for the unfilter network"));
    }
    model.fit(Task::Sequences(samples), val.map(Task::Sequences), cfg)
}

pub fn train_unfilter<T: Real>(
    model: &mut Surrogate<T>,
    blurred: &Tensor<T>,
    unblurred: &Tensor<T>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if blurred.shape != unblurred.shape {
        return Err(Error::shape("unfilter", format!("{:?} vs {:?}", blurred.shape, unblurred.shape)));
    }
    model.fit(Task::Pairs(blurred, unblurred), None, cfg)
}
