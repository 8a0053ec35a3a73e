use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// Complex rotation `[[conj c, conj s], [-s, c]]` that zeroes `y` in
/// `(x, y)`.
fn givens(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if r == 0.0 {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        (x / r, y / r)
    }
}

/// Eigenvalue of the trailing 2x2 block closer to its last diagonal entry.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let (m1, m2) = ((a + d) * 0.5 + disc, (a + d) * 0.5 - disc);
    if (m1 - d).norm() < (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Eigenvalues of a real square matrix by Hessenberg reduction followed by
/// single-shift complex QR with deflation.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("non-finite matrix in eigenvalue solve".into()));
    }
    let mut h = a.clone().hessenberg().h().map(|v| Complex64::new(v, 0.0));
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0;
    let mut total = 0;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let diag = h[(l, l)].norm() + h[(l - 1, l - 1)].norm();
            if sub <= eps * diag || sub <= eps * scale * 1e-3 {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > MAX_SWEEPS_PER_EIGENVALUE * n {
            return Err(Error::NonFinite(format!("QR eigenvalue iteration stalled after {total} sweeps")));
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.3 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let (u, v) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = c.conj() * u + s.conj() * v;
                h[(k + 1, j)] = -s * u + c * v;
            }
            rots.push((c, s));
        }
        for (off, &(c, s)) in rots.iter().enumerate() {
            let k = l + off;
            for i in l..=(k + 1).min(hi) {
                let (u, v) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = u * c + v * s;
                h[(i, k + 1)] = -u * s.conj() + v * c.conj();
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok((0..n).map(|i| h[(i, i)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn close(a: Vec<Complex64>, b: Vec<Complex64>, tol: f64) {
        let (a, b) = (sorted(a), sorted(b));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_and_near_identity() {
        close(eigenvalues(&DMatrix::identity(6, 6)).unwrap(), vec![Complex64::new(1.0, 0.0); 6], 1e-14);
        let mut rng = crate::nn::rng(3);
        let a = DMatrix::identity(8, 8) + DMatrix::from_fn(8, 8, |_, _| rng.gen_range(-1e-15..1e-15));
        for l in eigenvalues(&a).unwrap() {
            assert!((l - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_pair() {
        let th = 0.4f64;
        let a = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]) * 0.8;
        close(eigenvalues(&a).unwrap(), vec![Complex64::from_polar(0.8, th), Complex64::from_polar(0.8, -th)], 1e-14);
    }

    #[test]
    fn triangular_diagonal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 5.0, -1.0, 0.0, -3.0, 4.0, 0.0, 0.0, 0.5]);
        close(
            eigenvalues(&a).unwrap(),
            [2.0, -3.0, 0.5].iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            1e-13,
        );
    }

    #[test]
    fn matches_characteristic_roots_of_companion() {
        // roots 1, 2, 3, 4 of (x-1)(x-2)(x-3)(x-4) = x^4 - 10x^3 + 35x^2 - 50x + 24
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[10.0, -35.0, 50.0, -24.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        close(eigenvalues(&a).unwrap(), (1..=4).map(|v| Complex64::new(v as f64, 0.0)).collect(), 1e-10);
    }

    #[test]
    fn similarity_of_random_spectrum() {
        let mut rng = crate::nn::rng(7);
        for n in [3, 7, 12] {
            let d: Vec<f64> = (0..n).map(|i| 0.3 + i as f64 * 0.41).collect();
            let s = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)) + DMatrix::identity(n, n) * 3.0;
            let a = &s * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone())) * s.clone().try_inverse().unwrap();
            close(eigenvalues(&a).unwrap(), d.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), 1e-9);
        }
    }

    #[test]
    fn trace_and_determinant_preserved() {
        let mut rng = crate::nn::rng(9);
        for n in 1..10 {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let ls = eigenvalues(&a).unwrap();
            let tr: Complex64 = ls.iter().sum();
            let det: Complex64 = ls.iter().product();
            assert!((tr.re - a.trace()).abs() < 1e-10 && tr.im.abs() < 1e-10);
            assert!((det.re - a.determinant()).abs() < 1e-9 * a.determinant().abs().max(1.0));
        }
    }
}
