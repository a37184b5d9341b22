use core::f64::consts::PI;

use proptest::prelude::*;
use wignerlab_core::ensembles::{sample_wigner, EnsembleSpec};
use wignerlab_core::spectral::{
    centering_integral, eigenvalues, gamma_quantile, im_log_det, log_abs_det, m_sc, semicircle_cdf,
    semicircle_quantile, stieltjes, v_wig, Energy, SpectralSample, TestFunction,
};

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Semicircle CDF by quadrature in the angle variable `x = 2 sin(theta)`.
fn cdf_by_quadrature(e: f64) -> f64 {
    let top = (e / 2.0).clamp(-1.0, 1.0).asin();
    simpson(|t| 2.0 * t.cos().powi(2) / PI, -PI / 2.0, top, 20_000)
}

fn toy_spectrum() -> SpectralSample {
    SpectralSample::new(vec![-1.7, -0.9, -0.35, 0.05, 0.4, 1.1, 1.95])
}

#[test]
fn cdf_matches_quadrature() {
    for &e in &[-1.9, -1.0, -0.2, 0.0, 0.5, 1.0, 1.7] {
        assert!((semicircle_cdf(e) - cdf_by_quadrature(e)).abs() < 1e-12, "E = {e}");
    }
    assert!((semicircle_cdf(1.0) - 0.80450).abs() < 1e-5);
}

#[test]
fn quantile_inverts_quadrature_cdf() {
    let g = gamma_quantile(804, 1000);
    assert!((cdf_by_quadrature(g) - 0.804).abs() < 1e-11);
    assert!((g - 1.0).abs() < 2e-3);
}

#[test]
fn centering_integral_matches_quadrature() {
    let oracle = simpson(|s| ((s * s + 4.0).sqrt() - s) / 2.0, 0.0, 1.0, 2_000);
    assert!((centering_integral(1.0, 1) - oracle).abs() < 1e-12);
    let oracle = simpson(|s| ((s * s + 4.0).sqrt() - s) / 2.0, 0.0, 0.03, 200);
    assert!((centering_integral(0.03, 700) - 700.0 * oracle).abs() < 1e-10);
}

#[test]
fn trace_equals_eigenvalue_sum() {
    for (spec, seed) in [(EnsembleSpec::goe(60), 3u64), (EnsembleSpec::gue(45), 4)] {
        let m = sample_wigner(&spec, seed).unwrap();
        let s = eigenvalues(&m).unwrap();
        let sum: f64 = s.values().iter().sum();
        assert!((sum - m.trace()).abs() < m.n as f64 * 1e-10);
        assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(s.seed, Some(seed));
    }
}

#[test]
fn stieltjes_follows_semicircle_at_mesoscopic_scale() {
    let n = 1000;
    let m = sample_wigner(&EnsembleSpec::goe(n), 2024).unwrap();
    let s = eigenvalues(&m).unwrap();
    let z = Energy::new(0.3, 0.05);
    let diff = (stieltjes(&s, z).unwrap() - m_sc(z)).norm();
    assert!(diff < 10.0 / (n as f64 * z.eta), "|s - m_sc| = {diff}");
}

#[test]
fn v_wig_quadratic_oracle() {
    // Var(Tr W^2) -> 4 + 2 kappa4 for real Wigner matrices
    for &k4 in &[0.0, -2.0, 1.3] {
        let v = v_wig(&TestFunction::new(|x| x * x), k4).unwrap();
        assert!((v - (4.0 + 2.0 * k4)).abs() < 1e-9, "kappa4 = {k4}: {v}");
    }
}

#[test]
fn v_wig_log_growth_in_tau() {
    let taus = [0.1, 0.03, 0.01];
    let vals: Vec<f64> = taus.iter().map(|&t| v_wig(&TestFunction::log_modulus(t), 0.0).unwrap()).collect();
    let inc1 = (vals[1] - vals[0]) / (taus[0] / taus[1]).ln();
    let inc2 = (vals[2] - vals[1]) / (taus[1] / taus[2]).ln();
    assert!(inc1 > 0.0 && inc2 > 0.0);
    let ratio = inc2 / inc1;
    assert!((0.5..=2.0).contains(&ratio), "increments {inc1} {inc2}");
}

#[test]
fn v_wig_is_quadratic() {
    let phi = || TestFunction::new(|x: f64| (1.3 * x).sin() + 0.2 * x * x);
    let base = v_wig(&phi(), 0.4).unwrap();
    for &alpha in &[-2.0, 0.5, 3.0] {
        let v = v_wig(&phi().scaled(alpha), 0.4).unwrap();
        assert!((v - alpha * alpha * base).abs() <= 1e-10 * v.abs().max(1.0));
    }
}

#[test]
fn im_log_det_boundary_is_counting() {
    let s = toy_spectrum();
    for &(e, k) in &[(-2.0, 0usize), (-1.0, 1), (0.0, 3), (0.2, 4), (3.0, 7)] {
        assert_eq!(im_log_det(&s, e, 0.0).unwrap(), PI * k as f64);
        let near = im_log_det(&s, e, 1e-13).unwrap();
        assert!((near - PI * k as f64).abs() < 1e-9);
    }
}

fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn m_sc_self_consistent_and_herglotz(e in -10.0f64..10.0, log_eta in -3.0f64..2.0) {
        let eta = 10f64.powf(log_eta);
        let z = Energy::new(e, eta);
        let m = m_sc(z);
        prop_assert!(m.im > 0.0);
        let r = (m + m.inv() + z.z()).norm();
        prop_assert!(r < 1e-12, "residual {}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn quantile_inverts_cdf(e in -2.0f64..2.0) {
        let back = semicircle_quantile(semicircle_cdf(e));
        prop_assert!((back - e).abs() < 1e-10 || (e.abs() > 1.999 && (back - e).abs() < 1e-6));
    }

    #[test]
    fn cdf_nondecreasing(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(semicircle_cdf(lo) <= semicircle_cdf(hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn log_det_derivatives_match_stieltjes(e in -2.5f64..2.5, eta in 0.05f64..2.0) {
        let s = toy_spectrum();
        let n = s.n() as f64;
        let st = stieltjes(&s, Energy::new(e, eta)).unwrap();
        let h = 1e-5 * eta;
        let d_eta = fd(|t| log_abs_det(&s, Energy::new(e, t)).unwrap(), eta, h);
        prop_assert!((d_eta - n * st.im).abs() <= 1e-6 * (n * st.im).abs().max(1.0));
        let d_e = fd(|x| log_abs_det(&s, Energy::new(x, eta)).unwrap(), e, h);
        prop_assert!((d_e + n * st.re).abs() <= 1e-6 * (n * st.re).abs().max(1.0));
        let d_e_im = fd(|x| im_log_det(&s, x, eta).unwrap(), e, h);
        prop_assert!((d_e_im - n * st.im).abs() <= 1e-6 * (n * st.im).abs().max(1.0));
        let d_eta_im = fd(|t| im_log_det(&s, e, t).unwrap(), eta, h);
        prop_assert!((d_eta_im - n * st.re).abs() <= 1e-6 * (n * st.re).abs().max(1.0));
    }
}
