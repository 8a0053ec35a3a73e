use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Convergence threshold of the one-sided Jacobi sweeps: columns count as
/// orthogonal once |<a_p, a_q>| <= TOL * |a_p| |a_q|.
pub const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) V^T` with `k = min(m, n)` columns, singular
/// values non-increasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Number of singular values above `rel * s[0]`.
    pub fn rank(&self, rel: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().take_while(|&&s| s > rel * top && s > 0.0).count()
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Result<Svd> {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (cp, cq) = (w.column(p), w.column(q));
                let alpha = cp.norm_squared();
                let beta = cq.norm_squared();
                let gamma = cp.dot(&cq);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(w.as_mut_slice(), m, p, q, c, s);
                rotate(v.as_mut_slice(), n, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonFinite(format!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")));
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    if norms.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("non-finite snapshot data".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let top = norms[order[0]];
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        vs.set_column(k, &v.column(j));
        if sj > top * f64::EPSILON * m as f64 && sj > 0.0 {
            u.set_column(k, &(w.column(j) / sj));
            filled += 1;
            s.push(sj);
        } else {
            s.push(0.0);
        }
    }
    reorthonormalize(&mut u, filled);
    complete_orthonormal(&mut u, filled);
    Ok(Svd { u, s, v: vs })
}

/// Columns p, q <- (c p - s q, s p + c q) of a column-major block.
fn rotate(data: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Two modified Gram-Schmidt passes over the first `k` columns; the Jacobi
/// stopping rule leaves them orthogonal only to about `JACOBI_TOL`.
fn reorthonormalize(u: &mut DMatrix<f64>, k: usize) {
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let d = u.column(i).dot(&u.column(j));
                let ci = u.column(i).into_owned();
                u.column_mut(j).axpy(-d, &ci, 1.0);
            }
            let n = u.column(j).norm();
            u.column_mut(j).scale_mut(1.0 / n);
        }
    }
}

/// Replaces columns `filled..` with unit vectors orthogonal to everything
/// before them (Gram-Schmidt over the standard basis, done twice).
pub(crate) fn complete_orthonormal(u: &mut DMatrix<f64>, filled: usize) {
    let m = u.nrows();
    let mut next = 0;
    for k in filled..u.ncols() {
        while next < m {
            let mut e = nalgebra::DVector::<f64>::zeros(m);
            e[next] = 1.0;
            next += 1;
            for _ in 0..2 {
                for j in 0..k {
                    let d = u.column(j).dot(&e);
                    e -= u.column(j) * d;
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                u.set_column(k, &(e / norm));
                break;
            }
        }
    }
}
