//! Eigenvalues checked against solver-independent oracles.

use wignerlab_core::eigen::{hermitian_eigenvalues, symmetric_eigenvalues};
use wignerlab_core::ensembles::{sample_wigner, EnsembleSpec, Entries, EntryLaw, Symmetry};
use wignerlab_core::Complex64;

/// det(A - x I) by Gaussian elimination with partial pivoting.
fn shifted_det(n: usize, a: &[f64], x: f64) -> f64 {
    let mut m: Vec<f64> = a.to_vec();
    for i in 0..n {
        m[i * n + i] -= x;
    }
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&r, &s| m[r * n + c].abs().total_cmp(&m[s * n + c].abs())).unwrap();
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            det = -det;
        }
        let d = m[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = m[r * n + c] / d;
            for k in c..n {
                m[r * n + k] -= f * m[c * n + k];
            }
        }
    }
    det
}

/// Roots of the characteristic polynomial by sign scan and bisection.
fn char_poly_roots(n: usize, a: &[f64]) -> Vec<f64> {
    let bound = a.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
    let steps = 200_000;
    let h = 2.0 * bound / steps as f64;
    let mut roots = Vec::new();
    let mut lo = -bound;
    let mut flo = shifted_det(n, a, lo);
    for s in 1..=steps {
        let hi = -bound + s as f64 * h;
        let fhi = shifted_det(n, a, hi);
        if flo == 0.0 {
            roots.push(lo);
        } else if flo.signum() != fhi.signum() && fhi != 0.0 {
            let (mut l, mut r, mut fl) = (lo, hi, flo);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = shifted_det(n, a, mid);
                if fm == 0.0 {
                    l = mid;
                    r = mid;
                    break;
                }
                if fm.signum() == fl.signum() {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        lo = hi;
        flo = fhi;
    }
    roots
}

#[test]
fn goe_8x8_matches_characteristic_polynomial_roots() {
    for seed in 0..5 {
        let m = sample_wigner(&EnsembleSpec::goe(8), seed).unwrap();
        let Entries::Real(a) = &m.entries else { unreachable!() };
        let ev = symmetric_eigenvalues(8, a).unwrap();
        let roots = char_poly_roots(8, a);
        assert_eq!(roots.len(), 8, "seed {seed}: {roots:?}");
        for (x, y) in ev.iter().zip(&roots) {
            assert!((x - y).abs() < 1e-8, "seed {seed}: {x} vs {y}");
        }
    }
}

#[test]
fn hermitian_matches_real_embedding() {
    // [[Re, -Im], [Im, Re]] carries every eigenvalue of H twice
    for n in [1usize, 2, 3, 7, 33] {
        let m = sample_wigner(&EnsembleSpec::gue(n), 41 + n as u64).unwrap();
        let Entries::Complex(h) = &m.entries else { unreachable!() };
        let mut emb = vec![0.0; 4 * n * n];
        for i in 0..n {
            for j in 0..n {
                let z = h[i * n + j];
                emb[i * 2 * n + j] = z.re;
                emb[i * 2 * n + n + j] = -z.im;
                emb[(n + i) * 2 * n + j] = z.im;
                emb[(n + i) * 2 * n + n + j] = z.re;
            }
        }
        let ev = hermitian_eigenvalues(n, h).unwrap();
        let doubled = symmetric_eigenvalues(2 * n, &emb).unwrap();
        for (k, x) in ev.iter().enumerate() {
            assert!((x - doubled[2 * k]).abs() < 1e-11, "n={n} k={k}");
            assert!((x - doubled[2 * k + 1]).abs() < 1e-11, "n={n} k={k}");
        }
    }
}

#[test]
fn trace_and_frobenius_are_preserved() {
    for (sym, n) in [(Symmetry::Real, 100usize), (Symmetry::Complex, 60), (Symmetry::Real, 257)] {
        let spec = EnsembleSpec::new(sym, EntryLaw::bernoulli(), n);
        let m = sample_wigner(&spec, 3).unwrap();
        let ev = match &m.entries {
            Entries::Real(a) => symmetric_eigenvalues(n, a).unwrap(),
            Entries::Complex(a) => hermitian_eigenvalues(n, a).unwrap(),
        };
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        let tr: f64 = ev.iter().sum();
        assert!((tr - m.trace()).abs() <= n as f64 * 1e-10);
        let fro: f64 = ev.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((fro - m.frobenius_norm()).abs() <= n as f64 * 1e-10 * m.frobenius_norm());
    }
}

#[test]
fn complex_matrix_with_real_entries_matches_real_solver() {
    let n = 20;
    let m = sample_wigner(&EnsembleSpec::goe(n), 8).unwrap();
    let Entries::Real(a) = &m.entries else { unreachable!() };
    let c: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let x = symmetric_eigenvalues(n, a).unwrap();
    let y = hermitian_eigenvalues(n, &c).unwrap();
    for (p, q) in x.iter().zip(&y) {
        assert!((p - q).abs() < 1e-12);
    }
}
