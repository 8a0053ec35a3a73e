use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::eig::eigenvalues;
use super::svd::jacobi_svd;
use crate::dataset::LoadFrame;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Bound on |A W - W diag(lambda)| relative to |A|.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DmdModel {
    pub eigenvalues: Vec<Complex64>,
    /// `n x r` exact modes.
    pub modes: DMatrix<Complex64>,
    pub amplitudes: Vec<Complex64>,
    /// Frame shape the state vectors unflatten to.
    pub shape: (usize, usize),
}

impl DmdModel {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Least-squares amplitudes for a new initial state.
    pub fn fit_amplitudes(&mut self, x0: &DVector<f64>) -> Result<()> {
        self.amplitudes = least_squares(&self.modes, x0)?;
        Ok(())
    }
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn least_squares(phi: &DMatrix<Complex64>, x: &DVector<f64>) -> Result<Vec<Complex64>> {
    if phi.nrows() != x.len() {
        return Err(Error::shape("dmd", format!("state of {} for modes with {} rows", x.len(), phi.nrows())));
    }
    let svd = phi.clone().svd(true, true);
    let b = svd
        .solve(&x.map(|v| Complex64::new(v, 0.0)), RANK_TOL * svd.singular_values.max())
        .map_err(|e| Error::RankDeficient(format!("amplitude fit: {e}")))?;
    Ok(b.iter().copied().collect())
}

/// Eigenvalues by shifted QR; eigenvectors by inverse iteration
/// with a slightly offset shift. Members of a cluster of equal eigenvalues
/// start from different vectors and are orthogonalized against each other.
fn eigen(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let r = a.nrows();
    let lambdas = eigenvalues(a)?;
    let scale = a.norm().max(1.0);
    let mut rng = crate::nn::rng(r as u64);
    let mut w = DMatrix::<Complex64>::zeros(r, r);
    let mut done = vec![false; r];
    for i in 0..r {
        if done[i] {
            continue;
        }
        let cluster: Vec<usize> = (i..r).filter(|&j| !done[j] && (lambdas[j] - lambdas[i]).norm() <= 1e-8 * scale).collect();
        let lam = cluster.iter().map(|&j| lambdas[j]).sum::<Complex64>() / cluster.len() as f64;
        let shift = lam + Complex64::new(1e-10, 1e-10) * scale;
        let mut shifted = complex(a);
        for k in 0..r {
            shifted[(k, k)] -= shift;
        }
        let lu = shifted.lu();
        let mut found: Vec<DVector<Complex64>> = Vec::new();
        for &j in &cluster {
            let mut v = DVector::from_fn(r, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for _ in 0..3 {
                v = lu.solve(&v).ok_or_else(|| Error::NonFinite("singular shifted matrix in eigenvector solve".into()))?;
                for f in &found {
                    let d = f.dotc(&v);
                    v -= f * d;
                }
                v /= Complex64::new(v.norm(), 0.0);
            }
            w.set_column(j, &v);
            found.push(v);
            done[j] = true;
        }
    }
    let residual = (complex(a) * &w - &w * DMatrix::from_diagonal(&DVector::from_vec(lambdas.clone()))).norm();
    if !(residual <= EIGEN_RESIDUAL_TOL * scale) {
        return Err(Error::NonFinite(format!("eigen-decomposition residual {residual:e} exceeds {EIGEN_RESIDUAL_TOL:e}")));
    }
    Ok((lambdas, w))
}

/// Exact DMD of the snapshot pairs `x -> x_next` truncated to rank `r`.
pub fn dmd_fit(x: &DMatrix<f64>, x_next: &DMatrix<f64>, r: usize) -> Result<DmdModel> {
    if x.shape() != x_next.shape() {
        return Err(Error::shape("dmd", format!("{:?} vs {:?}", x.shape(), x_next.shape())));
    }
    let bound = x.nrows().min(x.ncols());
    if r == 0 || r > bound {
        return Err(Error::config(format!("DMD rank {r} must lie in 1..={bound}")));
    }
    let svd = jacobi_svd(x)?;
    let usable = svd.rank(RANK_TOL);
    if usable < r {
        return Err(Error::RankDeficient(format!(
            "singular value {} of the snapshots is zero within {RANK_TOL:e}; use rank <= {usable}",
            usable + 1
        )));
    }
    let u = svd.u.columns(0, r);
    let v = svd.v.columns(0, r);
    let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(r, svd.s[..r].iter().map(|s| 1.0 / s)));
    let b = x_next * v * s_inv;
    let a_tilde = u.transpose() * &b;
    let (eigenvalues, w) = eigen(&a_tilde)?;
    let modes = complex(&b) * w;
    let amplitudes = least_squares(&modes, &x.column(0).into_owned())?;
    Ok(DmdModel { eigenvalues, modes, amplitudes, shape: (x.nrows(), 1) })
}

/// DMD over consecutive frames of one sequence.
pub fn dmd_fit_frames(frames: &[LoadFrame], r: usize) -> Result<DmdModel> {
    if frames.len() < 2 {
        return Err(Error::config("DMD needs at least two snapshots"));
    }
    let x = super::snapshot_matrix(frames)?;
    let n = x.ncols();
    let mut model = dmd_fit(&x.columns(0, n - 1).into_owned(), &x.columns(1, n - 1).into_owned(), r)?;
    model.shape = (frames[0].h, frames[0].w);
    Ok(model)
}

/// `Re(Phi Lambda^t b)`.
pub fn dmd_state(model: &DmdModel, t: usize) -> DVector<f64> {
    let coeff = DVector::from_iterator(
        model.rank(),
        model.eigenvalues.iter().zip(&model.amplitudes).map(|(l, b)| l.powu(t as u32) * b),
    );
    (&model.modes * coeff).map(|c| c.re)
}

/// States at `t = start, ..., start + n_steps - 1`.
pub fn dmd_predict(model: &DmdModel, start: usize, n_steps: usize) -> Vec<DVector<f64>> {
    (start..start + n_steps).into_par_iter().map(|t| dmd_state(model, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::nn::rng(seed);
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    /// Embeds y_{t+1} = A y_t in 12 dimensions through an orthonormal map.
    fn planted(steps: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (rho, th) = (0.5f64, 0.3f64);
        let a = DMatrix::from_row_slice(3, 3, &[0.9, 0.0, 0.0, 0.0, rho * th.cos(), -rho * th.sin(), 0.0, rho * th.sin(), rho * th.cos()]);
        let mix = random(3, 3, 1) + DMatrix::identity(3, 3) * 2.0;
        let a = &mix * a * mix.clone().try_inverse().unwrap();
        let q = random(12, 3, 2).qr().q();
        let mut y = DVector::from_vec(vec![1.0, 0.7, -0.4]);
        let mut cols = Vec::new();
        for _ in 0..=steps {
            cols.push(&q * &y);
            y = &a * y;
        }
        (DMatrix::from_columns(&cols), a)
    }

    #[test]
    fn planted_system_recovered() {
        let (traj, _) = planted(50);
        let x = traj.columns(0, 50).into_owned();
        let xn = traj.columns(1, 50).into_owned();
        let m = dmd_fit(&x, &xn, 3).unwrap();
        let expect = [Complex64::new(0.9, 0.0), Complex64::from_polar(0.5, 0.3), Complex64::from_polar(0.5, -0.3)];
        for e in expect {
            let best = m.eigenvalues.iter().map(|l| (l - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{e}: {:?}", m.eigenvalues);
        }
        for (t, s) in dmd_predict(&m, 0, 20).iter().enumerate() {
            assert!((s - traj.column(t)).norm() < 1e-6, "step {t}");
        }
    }

    #[test]
    fn identity_dynamics_unit_eigenvalues() {
        let x = random(10, 6, 3);
        let m = dmd_fit(&x, &x, 6).unwrap();
        for l in &m.eigenvalues {
            assert!((l - Complex64::new(1.0, 0.0)).norm() < 1e-8, "{l}");
        }
    }

    #[test]
    fn growing_mode() {
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let traj = DMatrix::from_columns(&(0..8).map(|t| &v * 2f64.powi(t)).collect::<Vec<_>>());
        let m = dmd_fit(&traj.columns(0, 7).into_owned(), &traj.columns(1, 7).into_owned(), 1).unwrap();
        assert!((m.eigenvalues[0] - Complex64::new(2.0, 0.0)).norm() < 1e-10);
        assert!((dmd_state(&m, 0) - &v).norm() < 1e-10);
    }

    #[test]
    fn stable_spectrum_decays() {
        let (traj, _) = planted(30);
        let m = dmd_fit(&traj.columns(0, 30).into_owned(), &traj.columns(1, 30).into_owned(), 3).unwrap();
        assert!(m.eigenvalues.iter().all(|l| l.norm() < 1.0));
        assert!(dmd_state(&m, 400).norm() < 1e-12);
    }

    #[test]
    fn rank_beyond_data_is_reported() {
        let (traj, _) = planted(10);
        let err = dmd_fit(&traj.columns(0, 10).into_owned(), &traj.columns(1, 10).into_owned(), 5).unwrap_err();
        match err {
            Error::RankDeficient(msg) => assert!(msg.contains("rank <= 3"), "{msg}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn frames_and_new_initial_state() {
        let (traj, _) = planted(12);
        let frames: Vec<LoadFrame> =
            (0..13).map(|j| LoadFrame::new(3, 4, traj.column(j).iter().map(|&v| v as f32).collect()).unwrap()).collect();
        let mut m = dmd_fit_frames(&frames, 3).unwrap();
        assert_eq!(m.shape, (3, 4));
        let x5 = traj.column(5).into_owned();
        m.fit_amplitudes(&x5).unwrap();
        assert!((dmd_state(&m, 2) - traj.column(7)).norm() < 1e-5);
    }
}
