//! Eigenvalues of dense real symmetric and complex Hermitian matrices.
//!
//! Householder reduction to a real symmetric tridiagonal matrix followed by the
//! implicitly shifted QL iteration. Only eigenvalues are computed. The
//! reduction applies the rank-2 update of one step and the matrix-vector
//! product of the next step in a single sweep over the trailing block, which
//! halves the memory traffic of the textbook ordering.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

/// QL sweeps allowed per eigenvalue.
pub const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EigenError {
    #[error("QL iteration did not converge for eigenvalue {index} after {sweeps} sweeps")]
    NoConvergence { index: usize, sweeps: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
}

/// Real symmetric tridiagonal matrix: `diag[0..n]`, `off[0..n-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Reduces a real symmetric matrix (row-major, upper triangle read) to
/// tridiagonal form. `a` is overwritten.
pub fn tridiagonalize_real(n: usize, a: &mut [f64]) -> Tridiagonal {
    assert_eq!(a.len(), n * n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return Tridiagonal { diag, off };
    }
    // pending rank-2 update A <- A - v w^T - w v^T on the trailing block
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n - 1 {
        // bring row k up to date
        {
            let (vk, wk) = (v[k], w[k]);
            let row = &mut a[k * n + k..k * n + n];
            for ((x, &vj), &wj) in row.iter_mut().zip(&v[k..]).zip(&w[k..]) {
                *x -= vk * wj + wk * vj;
            }
        }
        diag[k] = a[k * n + k];
        let x = &a[k * n + k + 1..k * n + n];
        let x0 = x[0];
        let tail: f64 = x[1..].iter().map(|t| t * t).sum();
        let tau;
        if tail == 0.0 {
            off[k] = x0;
            tau = 0.0;
            u[k + 1..].iter_mut().for_each(|t| *t = 0.0);
            u[k + 1] = 1.0;
        } else {
            let norm = libm::sqrt(x0 * x0 + tail);
            let beta = if x0 >= 0.0 { -norm } else { norm };
            tau = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            u[k + 1] = 1.0;
            for (ut, &xt) in u[k + 2..].iter_mut().zip(&x[1..]) {
                *ut = xt * scale;
            }
            off[k] = beta;
        }
        // sweep the trailing block: finish the pending update, accumulate p = A u
        p[k + 1..].iter_mut().for_each(|t| *t = 0.0);
        for i in k + 1..n {
            let (vi, wi, ui) = (v[i], w[i], u[i]);
            let row = &mut a[i * n + i..i * n + n];
            row[0] -= 2.0 * vi * wi;
            let aii = row[0];
            let rest = &mut row[1..];
            let (vs, ws, us) = (&v[i + 1..], &w[i + 1..], &u[i + 1..]);
            let ps = &mut p[i + 1..];
            let mut acc = [0.0f64; 4];
            let m = rest.len();
            let chunks = m / 4;
            for c in 0..chunks {
                let b = 4 * c;
                for (l, a) in acc.iter_mut().enumerate() {
                    let j = b + l;
                    let val = rest[j] - (vi * ws[j] + wi * vs[j]);
                    rest[j] = val;
                    *a += val * us[j];
                    ps[j] += val * ui;
                }
            }
            let mut tail_acc = 0.0;
            for j in 4 * chunks..m {
                let val = rest[j] - (vi * ws[j] + wi * vs[j]);
                rest[j] = val;
                tail_acc += val * us[j];
                ps[j] += val * ui;
            }
            p[i] += aii * ui + (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail_acc;
        }
        // w = tau p - (tau^2 / 2)(p^T u) u
        let pu: f64 = p[k + 1..].iter().zip(&u[k + 1..]).map(|(a, b)| a * b).sum();
        let half = 0.5 * tau * tau * pu;
        for i in k + 1..n {
            v[i] = u[i];
            w[i] = tau * p[i] - half * u[i];
        }
    }
    diag[n - 1] = a[(n - 1) * n + n - 1] - 2.0 * v[n - 1] * w[n - 1];
    Tridiagonal { diag, off }
}

/// Reduces a Hermitian matrix (row-major, upper triangle read) to a real
/// symmetric tridiagonal matrix with the same eigenvalues. `a` is overwritten.
pub fn tridiagonalize_hermitian(n: usize, a: &mut [Complex64]) -> Tridiagonal {
    assert_eq!(a.len(), n * n);
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return Tridiagonal { diag, off };
    }
    let mut v = vec![zero; n];
    let mut w = vec![zero; n];
    let mut u = vec![zero; n];
    let mut p = vec![zero; n];
    let mut x = vec![zero; n];
    for k in 0..n - 1 {
        {
            let (vk, wk) = (v[k], w[k]);
            let row = &mut a[k * n + k..k * n + n];
            for ((t, &vj), &wj) in row.iter_mut().zip(&v[k..]).zip(&w[k..]) {
                *t -= vk * wj.conj() + wk * vj.conj();
            }
        }
        diag[k] = a[k * n + k].re;
        // column below the diagonal is the conjugate of the stored row
        for j in k + 1..n {
            x[j] = a[k * n + j].conj();
        }
        let alpha = x[k + 1];
        let tail: f64 = x[k + 2..].iter().map(|t| t.norm_sqr()).sum();
        let tau;
        if tail == 0.0 && alpha.im == 0.0 {
            off[k] = alpha.re;
            tau = zero;
            u[k + 1..].iter_mut().for_each(|t| *t = zero);
            u[k + 1] = Complex64::new(1.0, 0.0);
        } else {
            let norm = libm::sqrt(alpha.norm_sqr() + tail);
            let beta = if alpha.re >= 0.0 { -norm } else { norm };
            tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
            let scale = Complex64::new(1.0, 0.0) / (alpha - beta);
            u[k + 1] = Complex64::new(1.0, 0.0);
            for j in k + 2..n {
                u[j] = x[j] * scale;
            }
            off[k] = beta;
        }
        // A := H^H A H with H = I - tau u u^H
        p[k + 1..].iter_mut().for_each(|t| *t = zero);
        for i in k + 1..n {
            let (vi, wi, ui) = (v[i], w[i], u[i]);
            let row = &mut a[i * n + i..i * n + n];
            let d = row[0].re - 2.0 * (vi * wi.conj()).re;
            row[0] = Complex64::new(d, 0.0);
            let mut acc = Complex64::new(d, 0.0) * ui;
            for j in i + 1..n {
                let val = row[j - i] - (vi * w[j].conj() + wi * v[j].conj());
                row[j - i] = val;
                acc += val * u[j];
                p[j] += val.conj() * ui;
            }
            p[i] += acc;
        }
        for t in p[k + 1..].iter_mut() {
            *t *= tau;
        }
        // w = p - (tau / 2)(p^H u) u
        let pu: Complex64 = p[k + 1..].iter().zip(&u[k + 1..]).map(|(a, b)| a.conj() * b).sum();
        let alpha_w = -0.5 * tau * pu;
        for i in k + 1..n {
            v[i] = u[i];
            w[i] = p[i] + alpha_w * u[i];
        }
    }
    diag[n - 1] = a[(n - 1) * n + n - 1].re - 2.0 * (v[n - 1] * w[n - 1].conj()).re;
    Tridiagonal { diag, off }
}

/// Eigenvalues of a symmetric tridiagonal matrix, ascending.
pub fn tridiagonal_eigenvalues(t: &Tridiagonal) -> Result<Vec<f64>, EigenError> {
    let n = t.diag.len();
    let mut d = t.diag.clone();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&t.off[..n.saturating_sub(1)]);
    if d.iter().chain(e.iter()).any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(EigenError::NoConvergence { index: l, sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_unstable_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(n: usize, a: &[f64]) -> Result<Vec<f64>, EigenError> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let mut work = a.to_vec();
    tridiagonal_eigenvalues(&tridiagonalize_real(n, &mut work))
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(n: usize, a: &[Complex64]) -> Result<Vec<f64>, EigenError> {
    if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let mut work = a.to_vec();
    tridiagonal_eigenvalues(&tridiagonalize_hermitian(n, &mut work))
}
