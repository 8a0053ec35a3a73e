//! Reduced-order baselines: POD projection and exact DMD on flattened
//! load frames.

mod dmd;
mod drom;
mod eig;
mod svd;

use nalgebra::{DMatrix, DVector};

use crate::dataset::LoadFrame;
use crate::error::{Error, Result};

pub use dmd::{dmd_fit, dmd_fit_frames, dmd_predict, dmd_state, DmdModel, EIGEN_RESIDUAL_TOL, RANK_TOL};
pub use eig::eigenvalues;
pub use drom::{decode_drom, encode_drom, read_drom, write_drom, DROM_MAGIC, DROM_VERSION};
pub use svd::{jacobi_svd, Svd, JACOBI_TOL};

/// Frames as columns (`h * w` rows, row-major within a frame).
pub fn snapshot_matrix(frames: &[LoadFrame]) -> Result<DMatrix<f64>> {
    let first = frames.first().ok_or_else(|| Error::config("no snapshots"))?;
    let n = first.h * first.w;
    if let Some(f) = frames.iter().find(|f| (f.h, f.w) != (first.h, first.w)) {
        return Err(Error::shape("snapshots", format!("{}x{} frame among {}x{}", f.h, f.w, first.h, first.w)));
    }
    Ok(DMatrix::from_fn(n, frames.len(), |i, j| frames[j].data[i] as f64))
}

pub fn column_frame(col: &[f64], h: usize, w: usize) -> Result<LoadFrame> {
    LoadFrame::new(h, w, col.iter().map(|&v| v as f32).collect())
}

#[derive(Clone, Debug)]
pub struct Pod {
    /// `n x r`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// All singular values of the snapshot matrix, non-increasing.
    pub singular_values: Vec<f64>,
}

/// Leading `r` left singular vectors of `x`.
pub fn pod_fit(x: &DMatrix<f64>, r: usize) -> Result<Pod> {
    let bound = x.nrows().min(x.ncols());
    if r == 0 || r > bound {
        return Err(Error::config(format!("POD rank {r} must lie in 1..={bound}")));
    }
    let svd = jacobi_svd(x)?;
    Ok(Pod { basis: svd.u.columns(0, r).into_owned(), singular_values: svd.s })
}

/// Orthogonal projection `B B^T x`.
pub fn pod_reconstruct(basis: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != basis.nrows() {
        return Err(Error::shape("pod", format!("vector of {} for basis with {} rows", x.len(), basis.nrows())));
    }
    Ok(basis * (basis.transpose() * x))
}

/// Frobenius norm of `X - B B^T X` relative to that of `X`.
pub fn projection_error(basis: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let p = basis * (basis.transpose() * x);
    (x - p).norm() / x.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::nn::rng(seed);
        DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn full_rank_reconstructs_exactly() {
        let x = random(40, 12, 1);
        let pod = pod_fit(&x, 12).unwrap();
        assert!(projection_error(&pod.basis, &x) < 1e-8);
        let btb = pod.basis.transpose() * &pod.basis;
        assert!((btb - DMatrix::identity(12, 12)).norm() < 1e-10);
    }

    #[test]
    fn exact_rank_two() {
        let a = random(30, 2, 2);
        let x = &a * random(2, 9, 3);
        let pod = pod_fit(&x, 2).unwrap();
        assert!(projection_error(&pod.basis, &x) < 1e-12);
        assert!(pod.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn error_monotone_in_rank_and_idempotent() {
        let x = random(25, 10, 4);
        let mut last = f64::INFINITY;
        for r in 1..=10 {
            let b = pod_fit(&x, r).unwrap().basis;
            let e = projection_error(&b, &x);
            assert!(e <= last + 1e-14);
            last = e;
            let v = x.column(3).into_owned();
            let once = pod_reconstruct(&b, &v).unwrap();
            let twice = pod_reconstruct(&b, &once).unwrap();
            assert!((&once - twice).norm() < 1e-12 * once.norm());
        }
    }

    #[test]
    fn beats_random_bases() {
        let x = &random(50, 5, 5) * random(5, 20, 6) + random(50, 20, 7) * 0.05;
        let mut rng = crate::nn::rng(8);
        for r in [1, 3, 5, 8] {
            let pod_err = projection_error(&pod_fit(&x, r).unwrap().basis, &x);
            for _ in 0..20 {
                let g = DMatrix::from_fn(50, r, |_, _| rng.sample::<f64, _>(StandardNormal));
                let q = g.qr().q();
                assert!(pod_err <= projection_error(&q, &x) + 1e-12);
            }
        }
    }

    #[test]
    fn bad_rank_and_shapes() {
        let x = random(6, 4, 9);
        assert!(matches!(pod_fit(&x, 5), Err(Error::Config(_))));
        assert!(matches!(pod_fit(&x, 0), Err(Error::Config(_))));
        let b = pod_fit(&x, 2).unwrap().basis;
        assert!(pod_reconstruct(&b, &DVector::zeros(5)).is_err());
    }

    #[test]
    fn snapshot_layout_is_row_major_per_column() {
        let f0 = LoadFrame::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f1 = LoadFrame::new(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let x = snapshot_matrix(&[f0.clone(), f1]).unwrap();
        assert_eq!(x[(1, 0)], 2.0);
        assert_eq!(x[(2, 1)], 7.0);
        let back = column_frame(x.column(0).as_slice(), 2, 2).unwrap();
        assert_eq!(back, f0);
        assert!(snapshot_matrix(&[LoadFrame::zeros(2, 2), LoadFrame::zeros(3, 2)]).is_err());
    }
}
