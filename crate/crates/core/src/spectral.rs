//! Deterministic spectral functionals.
//!
//! Everything here is a pure function of an ordered spectrum or of a spectral
//! parameter `z = E + i eta`: log-determinants, Stieltjes transforms, the
//! semicircle law and its quantiles, the regularization centering integral and
//! the limiting variance functional of linear statistics.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use thiserror::Error;

use crate::eigen::{self, EigenError};
use crate::ensembles::{Entries, MatrixSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigensolver failed on matrix with seed {seed:?}: {source}")]
    Eigen { seed: Option<u64>, source: EigenError },
    #[error("eigenvalue {index} coincides with the real shift {shift}")]
    Singular { index: usize, shift: f64 },
    #[error("spectral parameter must lie in the upper half plane (eta = {0})")]
    NotInUpperHalfPlane(f64),
    #[error("quadrature produced a non-finite value with {nodes} nodes")]
    NonFiniteQuadrature { nodes: usize },
    #[error("eigenvalues are not sorted")]
    Unsorted,
}

/// Spectral parameter `z = E + i eta` with `eta >= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub e: f64,
    pub eta: f64,
}

impl Energy {
    pub fn new(e: f64, eta: f64) -> Self {
        debug_assert!(eta >= 0.0, "eta must be nonnegative");
        Energy { e, eta }
    }

    pub fn real(e: f64) -> Self {
        Energy { e, eta: 0.0 }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }

    fn require_upper(&self) -> Result<(), SpectralError> {
        if self.eta > 0.0 {
            Ok(())
        } else {
            Err(SpectralError::NotInUpperHalfPlane(self.eta))
        }
    }
}

impl From<Complex64> for Energy {
    fn from(z: Complex64) -> Self {
        Energy { e: z.re, eta: z.im }
    }
}

/// Ordered eigenvalues of one matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    eigenvalues: Vec<f64>,
    /// Seed of the originating matrix, if any.
    pub seed: Option<u64>,
}

impl SpectralSample {
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_unstable_by(f64::total_cmp);
        SpectralSample { eigenvalues, seed: None }
    }

    /// Takes an already sorted vector.
    pub fn from_sorted(eigenvalues: Vec<f64>, seed: Option<u64>) -> Result<Self, SpectralError> {
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(SpectralError::Unsorted);
        }
        Ok(SpectralSample { eigenvalues, seed })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn into_values(self) -> Vec<f64> {
        self.eigenvalues
    }

    /// `#{k : lambda_k < e}`.
    pub fn count_below(&self, e: f64) -> usize {
        self.eigenvalues.partition_point(|&x| x < e)
    }

    /// `#{k : a < lambda_k < b}`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.eigenvalues.partition_point(|&x| x <= a);
        let hi = self.eigenvalues.partition_point(|&x| x < b);
        hi.saturating_sub(lo)
    }
}

/// Full ordered spectrum of a self-adjoint matrix.
pub fn eigenvalues(m: &MatrixSample) -> Result<SpectralSample, SpectralError> {
    let n = m.n;
    let ev = match &m.entries {
        Entries::Real(a) => eigen::symmetric_eigenvalues(n, a),
        Entries::Complex(a) => eigen::hermitian_eigenvalues(n, a),
    }
    .map_err(|source| SpectralError::Eigen { seed: m.seed, source })?;
    Ok(SpectralSample { eigenvalues: ev, seed: m.seed })
}

/// `sum_k log |lambda_k - E - i eta|`.
pub fn log_abs_det(s: &SpectralSample, shift: Energy) -> Result<f64, SpectralError> {
    let eta2 = shift.eta * shift.eta;
    let mut acc = 0.0;
    for (k, &x) in s.eigenvalues.iter().enumerate() {
        let d = x - shift.e;
        let r2 = d * d + eta2;
        if r2 == 0.0 {
            return Err(SpectralError::Singular { index: k, shift: shift.e });
        }
        acc += 0.5 * libm::log(r2);
    }
    Ok(acc)
}

/// `sum_k [pi/2 - arctan((lambda_k - E) / eta)]`; at `eta = 0` this is the
/// boundary value `pi * #{lambda_k < E}`.
pub fn im_log_det(s: &SpectralSample, e: f64, eta: f64) -> Result<f64, SpectralError> {
    if eta == 0.0 {
        if let Ok(index) = s.eigenvalues.binary_search_by(|x| x.total_cmp(&e)) {
            return Err(SpectralError::Singular { index, shift: e });
        }
        return Ok(PI * s.count_below(e) as f64);
    }
    Ok(s.eigenvalues.iter().map(|&x| FRAC_PI_2 - libm::atan((x - e) / eta)).sum())
}

/// Empirical Stieltjes transform `(1/N) sum_k 1 / (lambda_k - z)`.
pub fn stieltjes(s: &SpectralSample, z: Energy) -> Result<Complex64, SpectralError> {
    z.require_upper()?;
    let mut re = 0.0;
    let mut im = 0.0;
    for &x in &s.eigenvalues {
        let d = x - z.e;
        let den = d * d + z.eta * z.eta;
        re += d / den;
        im += z.eta / den;
    }
    let n = s.n() as f64;
    Ok(Complex64::new(re / n, im / n))
}

/// Stieltjes transform of the semicircle law.
///
/// Both roots of `m^2 + z m + 1 = 0` are formed without cancellation (the large
/// one directly, the small one as its reciprocal) and the root in the upper half
/// plane is returned.
pub fn m_sc(z: Energy) -> Complex64 {
    m_sc_complex(z.z())
}

pub(crate) fn m_sc_complex(z: Complex64) -> Complex64 {
    let s = (z * z - 4.0).sqrt();
    let q1 = -z - s;
    let q2 = -z + s;
    let big = if q1.norm_sqr() >= q2.norm_sqr() { q1 } else { q2 };
    let r_big = big * 0.5;
    let r_small = Complex64::new(1.0, 0.0) / r_big;
    if r_small.im >= r_big.im {
        r_small
    } else {
        r_big
    }
}

/// Semicircle density `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        libm::sqrt(4.0 - x * x) / (2.0 * PI)
    }
}

/// Semicircle distribution function, closed form.
pub fn semicircle_cdf(e: f64) -> f64 {
    if e <= -2.0 {
        return 0.0;
    }
    if e >= 2.0 {
        return 1.0;
    }
    let v = 0.5 + (0.5 * e * libm::sqrt(4.0 - e * e) + 2.0 * libm::asin(0.5 * e)) / (2.0 * PI);
    v.clamp(0.0, 1.0)
}

/// Bisection steps used by [`semicircle_quantile`].
pub const QUANTILE_BISECTIONS: usize = 60;

/// Point `x` with `semicircle_cdf(x) = p`.
pub fn semicircle_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -2.0;
    }
    if p >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..QUANTILE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Classical location `gamma_k` with `semicircle_cdf(gamma_k) = k / N`.
pub fn gamma_quantile(k: usize, n: usize) -> f64 {
    assert!(k >= 1 && k <= n, "need 1 <= k <= N");
    if 2 * k == n {
        return 0.0;
    }
    semicircle_quantile(k as f64 / n as f64)
}

/// All classical locations `gamma_1, ..., gamma_N`.
pub fn gamma_quantiles(n: usize) -> Vec<f64> {
    (1..=n).map(|k| gamma_quantile(k, n)).collect()
}

/// `N * int_0^eta Im m_sc(i s) ds`, with `Im m_sc(i s) = (sqrt(s^2 + 4) - s) / 2`.
pub fn centering_integral(eta: f64, n: usize) -> f64 {
    let primitive = 0.25 * eta * libm::sqrt(eta * eta + 4.0) + libm::asinh(0.5 * eta) - 0.25 * eta * eta;
    n as f64 * primitive
}

/// Regularization scale `exp((log N)^{1/4}) / N`.
pub fn eta0(n: usize) -> f64 {
    let nf = n as f64;
    libm::exp(libm::pow(libm::log(nf), 0.25)) / nf
}

/// `int log|x - E| d rho_sc(x)` for real `E`.
pub fn semicircle_log_potential(e: f64) -> f64 {
    let a = e.abs();
    if a <= 2.0 {
        0.25 * e * e - 0.5
    } else {
        let r = libm::sqrt(a * a - 4.0);
        0.5 + 0.25 * (a * a - 4.0) - 0.25 * a * r + libm::log(0.5 * (a + r))
    }
}

/// Real test function for the variance functional.
pub struct TestFunction {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Lipschitz bound, when known.
    pub lipschitz: Option<f64>,
}

impl TestFunction {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TestFunction { f: Box::new(f), lipschitz: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `x -> log|x - i tau| = log(x^2 + tau^2) / 2`.
    pub fn log_modulus(tau: f64) -> Self {
        Self::new(move |x| 0.5 * libm::log(x * x + tau * tau))
    }

    /// `x -> alpha * phi(x)`.
    pub fn scaled(self, alpha: f64) -> Self {
        let lip = self.lipschitz.map(|l| l * alpha.abs());
        let f = self.f;
        TestFunction { f: Box::new(move |x| alpha * f(x)), lipschitz: lip }
    }
}

/// Gauss-Chebyshev controls for [`v_wig_detailed`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub rel_tol: f64,
    /// Below this node separation the difference quotient is replaced by a
    /// centered derivative.
    pub diagonal_gap: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { initial_nodes: 400, max_nodes: 25_600, rel_tol: 1e-8, diagonal_gap: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VWigResult {
    pub value: f64,
    pub nodes: usize,
    pub rel_change: f64,
    pub converged: bool,
}

/// Limiting variance of `sum_k phi(lambda_k)` for a real Wigner matrix with
/// fourth cumulant `kappa4`, with the defaults of [`QuadratureOptions`].
pub fn v_wig(phi: &TestFunction, kappa4: f64) -> Result<f64, SpectralError> {
    v_wig_detailed(phi, kappa4, QuadratureOptions::default()).map(|r| r.value)
}

/// As [`v_wig`], doubling the node count until the relative change drops below
/// `opts.rel_tol` or `opts.max_nodes` is reached.
pub fn v_wig_detailed(phi: &TestFunction, kappa4: f64, opts: QuadratureOptions) -> Result<VWigResult, SpectralError> {
    let mut nodes = opts.initial_nodes.max(2);
    let mut prev = v_wig_at(phi, kappa4, nodes, opts.diagonal_gap)?;
    loop {
        let next_nodes = nodes * 2;
        if next_nodes > opts.max_nodes {
            return Ok(VWigResult { value: prev, nodes, rel_change: f64::NAN, converged: false });
        }
        let next = v_wig_at(phi, kappa4, next_nodes, opts.diagonal_gap)?;
        let scale = next.abs().max(prev.abs());
        let rel = if scale == 0.0 { 0.0 } else { (next - prev).abs() / scale };
        // absolute floor for functionals that vanish identically
        if rel < opts.rel_tol || (next - prev).abs() < 1e-14 {
            return Ok(VWigResult { value: next, nodes: next_nodes, rel_change: rel, converged: true });
        }
        prev = next;
        nodes = next_nodes;
    }
}

/// Tensor Gauss-Chebyshev rule on `(-2, 2)^2`; the nodes absorb the
/// `1/sqrt(4 - lambda^2)` edge weights.
fn v_wig_at(phi: &TestFunction, kappa4: f64, nodes: usize, gap: f64) -> Result<f64, SpectralError> {
    let h = PI / nodes as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| 2.0 * libm::cos((i as f64 + 0.5) * h)).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| phi.eval(x)).collect();
    let step = 1e-5;
    let ds: Vec<f64> = xs.iter().map(|&x| (phi.eval(x + step) - phi.eval(x - step)) / (2.0 * step)).collect();

    let mut double = 0.0;
    for i in 0..nodes {
        let (xi, fi) = (xs[i], fs[i]);
        let mut row = 0.0;
        for j in 0..nodes {
            let dx = xi - xs[j];
            let q = if dx.abs() < gap { 0.5 * (ds[i] + ds[j]) } else { (fi - fs[j]) / dx };
            row += q * q * (4.0 - xi * xs[j]);
        }
        double += row;
    }
    let first = double * h * h / (2.0 * PI * PI);
    let single: f64 = xs.iter().zip(&fs).map(|(&x, &f)| f * (2.0 - x * x)).sum::<f64>() * h;
    let value = first + kappa4 / (2.0 * PI * PI) * single * single;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SpectralError::NonFiniteQuadrature { nodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_abs_det_examples() {
        let s = SpectralSample::new(vec![1.0, core::f64::consts::E]);
        assert!(close(log_abs_det(&s, Energy::real(0.0)).unwrap(), 1.0, 1e-15));
        let s = SpectralSample::new(vec![-2.0, 3.0]);
        assert!(close(log_abs_det(&s, Energy::real(0.0)).unwrap(), libm::log(6.0), 1e-15));
        let s = SpectralSample::new(vec![0.0]);
        assert_eq!(log_abs_det(&s, Energy::new(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(log_abs_det(&s, Energy::real(0.0)), Err(SpectralError::Singular { index: 0, shift: 0.0 }));
    }

    #[test]
    fn im_log_det_examples() {
        let s = SpectralSample::new(vec![1.0]);
        assert_eq!(im_log_det(&s, 0.0, 0.0).unwrap(), 0.0);
        let s = SpectralSample::new(vec![-1.0]);
        assert_eq!(im_log_det(&s, 0.0, 0.0).unwrap(), PI);
        let s = SpectralSample::new(vec![-1.0, 1.0]);
        assert!(close(im_log_det(&s, 0.0, 1.0).unwrap(), PI, 1e-15));
        assert!(im_log_det(&s, 1.0, 0.0).is_err());
    }

    #[test]
    fn im_log_det_small_eta_approaches_counting() {
        let s = SpectralSample::new(vec![-1.5, -0.3, 0.2, 0.9]);
        let v = im_log_det(&s, 0.0, 1e-12).unwrap();
        assert!(close(v, 2.0 * PI, 1e-10));
    }

    #[test]
    fn stieltjes_examples() {
        let s = SpectralSample::new(vec![0.0]);
        let z = stieltjes(&s, Energy::new(0.0, 1.0)).unwrap();
        assert!(close(z.re, 0.0, 1e-15) && close(z.im, 1.0, 1e-15));
        let s = SpectralSample::new(vec![-0.7, 0.7]);
        let z = stieltjes(&s, Energy::new(0.0, 1.0)).unwrap();
        assert!(z.re.abs() < 1e-16 && z.im > 0.0);
        assert!(stieltjes(&s, Energy::real(0.0)).is_err());
    }

    #[test]
    fn m_sc_examples() {
        let m = m_sc(Energy::new(0.0, 1.0));
        assert!(close(m.re, 0.0, 1e-15) && close(m.im, (libm::sqrt(5.0) - 1.0) / 2.0, 1e-15));
        let m = m_sc(Energy::new(0.0, 2.0));
        assert!(close(m.im, libm::sqrt(2.0) - 1.0, 1e-15));
        let m = m_sc(Energy::new(0.0, 100.0));
        // -1/z - 1/z^3 - ...
        assert!(close(m.im, 0.01 - 1e-6 + 2e-10, 1e-13), "{m}");
    }

    #[test]
    fn semicircle_cdf_examples() {
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert_eq!(semicircle_cdf(-5.0), 0.0);
        assert_eq!(semicircle_cdf(2.5), 1.0);
        assert!(close(semicircle_cdf(0.0), 0.5, 1e-16));
        let expected = 0.5 + (libm::sqrt(3.0) / 2.0 + PI / 3.0) / (2.0 * PI);
        assert!(close(semicircle_cdf(1.0), expected, 1e-15));
        assert!(close(expected, 0.80450, 1e-5));
    }

    #[test]
    fn gamma_quantile_examples() {
        assert_eq!(gamma_quantile(10, 10), 2.0);
        assert_eq!(gamma_quantile(5, 10), 0.0);
        assert_eq!(gamma_quantile(1, 1), 2.0);
        let g = gamma_quantile(804, 1000);
        assert!(close(g, 1.0, 2e-3), "{g}");
        assert!(close(semicircle_cdf(g), 0.804, 1e-12));
        let q = gamma_quantiles(50);
        assert!(q.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn centering_integral_small_eta() {
        assert_eq!(centering_integral(0.0, 100), 0.0);
        let eta = 1e-6;
        assert!(close(centering_integral(eta, 1000), 1000.0 * eta, 1e-9));
    }

    #[test]
    fn eta0_value() {
        let n = 512;
        let expected = libm::exp(libm::pow(libm::log(512.0), 0.25)) / 512.0;
        assert_eq!(eta0(n), expected);
        assert!(eta0(n) * 512.0 > 1.0);
    }

    #[test]
    fn v_wig_linear_and_constant() {
        let v = v_wig(&TestFunction::new(|x| x), 0.7).unwrap();
        assert!(close(v, 2.0, 1e-10), "{v}");
        let v = v_wig(&TestFunction::new(|_| 3.5), -2.0).unwrap();
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn log_potential_matches_log_det_centering() {
        assert_eq!(semicircle_log_potential(0.0), -0.5);
        // continuous across the edge
        let inner = semicircle_log_potential(2.0);
        let outer = semicircle_log_potential(2.0 + 1e-12);
        assert!(close(inner, outer, 1e-5));
    }
}
