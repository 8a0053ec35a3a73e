use super::Surrogate;
use crate::dataset::{denormalize, normalize, CaseRecord, LoadFrame};
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

fn start_window<T: Real>(model: &Surrogate<T>, start: &Tensor<T>) -> Result<Tensor<T>> {
    let p = model.arch.dims.patch;
    if start.shape != [model.arch.ell, p, p] {
        return Err(Error::shape(
            model.arch.variant.name(),
            format!("start frames {:?}, expected [{}, {p}, {p}]", start.shape, model.arch.ell),
        ));
    }
    let mut shape = vec![1];
    shape.extend_from_slice(&start.shape);
    start.clone().reshape(&shape)
}

fn check_finite<T: Real>(model: &Surrogate<T>, frame: &Tensor<T>, step: usize) -> Result<()> {
    if frame.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{} rollout produced a non-finite frame at step {step}", model.arch.variant.name())))
    }
}

/// Autoregressive prediction of `n_steps` frames `[n_steps, p, p]` from
/// `ell` start frames `[ell, p, p]`; each prediction is appended to the
/// window and the oldest frame dropped.
pub fn rollout<T: Real>(model: &Surrogate<T>, start: &Tensor<T>, n_steps: usize) -> Result<Tensor<T>> {
    let mut window = start_window(model, start)?;
    let f = window.row_len() / model.arch.ell;
    let p = model.arch.dims.patch;
    let mut out = Vec::with_capacity(n_steps * f);
    for step in 0..n_steps {
        let next = model.predict(&window)?;
        check_finite(model, &next, step)?;
        out.extend_from_slice(&next.data);
        window.data.drain(..f);
        window.data.extend_from_slice(&next.data);
    }
    Tensor::new(&[n_steps, p, p], out)
}

/// Encodes the start window once, advances the latent state with K only
/// and decodes every state.
pub fn kae_latent_rollout<T: Real>(model: &Surrogate<T>, start: &Tensor<T>, n_steps: usize) -> Result<Tensor<T>> {
    let p = model.arch.dims.patch;
    let mut z = model.encode(&start_window(model, start)?)?;
    let mut out = Vec::with_capacity(n_steps * p * p);
    for step in 0..n_steps {
        z = model.advance(&z)?;
        let next = model.decode(&z)?;
        check_finite(model, &next, step)?;
        out.extend_from_slice(&next.data);
    }
    Tensor::new(&[n_steps, p, p], out)
}

/// Predicts every frame of `case` after the first `ell` (in Pa) from its
/// first `ell` frames.
pub fn rollout_case(model: &Surrogate<f32>, case: &CaseRecord, x_min: f64, x_max: f64, latent_only: bool) -> Result<CaseRecord> {
    let ell = model.arch.ell;
    let p = model.arch.dims.patch;
    if case.len() <= ell {
        return Err(Error::config(format!("case has {} frames, need more than {ell}", case.len())));
    }
    if case.shape() != Some((p, p)) {
        return Err(Error::shape(model.arch.variant.name(), format!("case frames {:?} for patch {p}", case.shape())));
    }
    let mut start = Vec::with_capacity(ell * p * p);
    case.frames[..ell].iter().for_each(|f| start.extend_from_slice(&f.data));
    normalize(&mut start, x_min, x_max)?;
    let start = Tensor::new(&[ell, p, p], start)?;
    let n = case.len() - ell;
    let mut pred = if latent_only { kae_latent_rollout(model, &start, n)? } else { rollout(model, &start, n)? };
    denormalize(&mut pred.data, x_min, x_max)?;
    let frames = pred.data.chunks(p * p).map(|c| LoadFrame::new(p, p, c.to_vec())).collect::<Result<_>>()?;
    Ok(CaseRecord { frames, ..case.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogates::{ModelArch, Variant};

    fn start(p: usize) -> Tensor<f32> {
        let data = (0..3 * p * p).map(|i| ((i as f32 * 0.11).sin() + 1.0) * 0.4).collect();
        Tensor::new(&[3, p, p], data).unwrap()
    }

    #[test]
    fn zero_steps_empty() {
        let m = Surrogate::<f32>::build(ModelArch::desk(Variant::Cjm), 0).unwrap();
        assert!(rollout(&m, &start(32), 0).unwrap().is_empty());
    }

    #[test]
    fn first_step_is_single_prediction_and_repeat_runs_match() {
        for v in Variant::SURROGATES {
            let m = Surrogate::<f32>::build(ModelArch::desk(v), 4).unwrap();
            let s = start(32);
            let r = rollout(&m, &s, 3).unwrap();
            let one = m.predict(&s.clone().reshape(&[1, 3, 32, 32]).unwrap()).unwrap();
            assert_eq!(&r.data[..1024], &one.data[..], "{v:?}");
            let again = rollout(&m, &s, 3).unwrap();
            assert!(r.data.iter().zip(&again.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn window_slides() {
        let m = Surrogate::<f32>::build(ModelArch::desk(Variant::Cjmdd), 2).unwrap();
        let s = start(32);
        let r = rollout(&m, &s, 2).unwrap();
        let mut w = s.data[1024..].to_vec();
        w.extend_from_slice(&r.data[..1024]);
        let second = m.predict(&Tensor::new(&[1, 3, 32, 32], w).unwrap()).unwrap();
        assert_eq!(&r.data[1024..], &second.data[..]);
    }

    #[test]
    fn latent_rollout_first_step_and_norm_bound() {
        let m = Surrogate::<f64>::build(ModelArch::desk(Variant::Kae), 8).unwrap();
        let s = start(32).cast::<f64>();
        let a = rollout(&m, &s, 1).unwrap();
        let b = kae_latent_rollout(&m, &s, 1).unwrap();
        assert_eq!(a.data, b.data);
        // K starts as rotations, so the latent norm is preserved
        let mut z = m.encode(&s.clone().reshape(&[1, 3, 32, 32]).unwrap()).unwrap();
        let n0 = z.dot(&z).sqrt();
        for _ in 0..20 {
            z = m.advance(&z).unwrap();
            assert!(z.dot(&z).sqrt() <= n0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn non_finite_reports_step() {
        let mut m = Surrogate::<f32>::build(ModelArch::desk(Variant::Cjm), 0).unwrap();
        let id = m.store.id("out_dense/bias").unwrap();
        m.store.value_mut(id).data[5] = f32::NAN;
        match rollout(&m, &start(32), 4) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("step 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_kae_has_no_latent_rollout() {
        let m = Surrogate::<f32>::build(ModelArch::desk(Variant::Cjm), 0).unwrap();
        assert!(kae_latent_rollout(&m, &start(32), 1).is_err());
    }
}
