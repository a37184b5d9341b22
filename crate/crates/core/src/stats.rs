//! Statistical toolkit for replica reduction: sample moments with standard
//! errors, Kolmogorov-Smirnov tests, quantiles, histograms, correlations and a
//! weighted least-squares slope.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use thiserror::Error;

/// Smallest sample accepted by the KS tests.
pub const KS_MIN_SAMPLES: usize = 20;
/// Terms of the Kolmogorov series.
pub const KOLMOGOROV_TERMS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("sample contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

fn check_finite(x: &[f64]) -> Result<(), StatsError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StatsError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Sample moments with their (normal-theory) standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    /// Uses the fourth central moment, so it is valid for non-normal data.
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn describe(x: &[f64]) -> Result<Description, StatsError> {
    let n = x.len();
    if n < 4 {
        return Err(StatsError::TooFewSamples { n, min: 4 });
    }
    check_finite(x)?;
    let nf = n as f64;
    let m = mean(x);
    let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        c2 += d2;
        c3 += d2 * d;
        c4 += d2 * d2;
    }
    c2 /= nf;
    c3 /= nf;
    c4 /= nf;
    let var = c2 * nf / (nf - 1.0);
    let (skew, kurt) = if c2 > 0.0 { (c3 / libm::pow(c2, 1.5), c4 / (c2 * c2) - 3.0) } else { (0.0, 0.0) };
    let se_skew = libm::sqrt(6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0)));
    let se_kurt = 2.0 * se_skew * libm::sqrt((nf * nf - 1.0) / ((nf - 3.0) * (nf + 5.0)));
    Ok(Description {
        n,
        mean: m,
        variance: var,
        skewness: skew,
        excess_kurtosis: kurt,
        se_mean: libm::sqrt(var / nf),
        se_variance: libm::sqrt(((c4 - c2 * c2) / nf).max(0.0)),
        se_skewness: se_skew,
        se_kurtosis: se_kurt,
    })
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Survival function of the Kolmogorov distribution,
/// `2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    // the alternating series converges too slowly below this point; the
    // distribution function is below 1e-16 there anyway
    if lambda < 0.2 {
        return 1.0;
    }
    let mut acc = 0.0;
    let mut sign = 1.0;
    for k in 1..=KOLMOGOROV_TERMS {
        let kf = k as f64;
        acc += sign * libm::exp(-2.0 * kf * kf * lambda * lambda);
        sign = -sign;
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// Result of a Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the asymptotic p-value.
    pub n_eff: f64,
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = libm::sqrt(n_eff);
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test of `data` against the continuous distribution `cdf`.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatsError> {
    let n = data.len();
    if n < KS_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples { n, min: KS_MIN_SAMPLES });
    }
    check_finite(data)?;
    let mut x = data.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, nf), n_eff: nf })
}

/// One-sample KS test against the standard normal law.
pub fn ks_normal(data: &[f64]) -> Result<KsResult, StatsError> {
    ks_one_sample(data, normal_cdf)
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(StatsError::TooFewSamples { n: s.len(), min: KS_MIN_SAMPLES });
        }
        check_finite(s)?;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    y.sort_unstable_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (nf, mf) = (n as f64, m as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    let n_eff = nf * mf / (nf + mf);
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n_eff), n_eff })
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`); `sorted` must be nondecreasing.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Standard error of the sample median, from the spread of the order
/// statistics at ranks `n/2 -+ sqrt(n)/2`.
pub fn median_standard_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut s = x.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let half = 0.5 / libm::sqrt(n as f64);
    0.5 * (quantile_sorted(&s, 0.5 + half) - quantile_sorted(&s, 0.5 - half))
}

/// Equal-width histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram over `[min, max]` of the data; the last bin is closed.
pub fn histogram(x: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let finite = x.iter().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    } else if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * w }).collect();
    let mut counts = vec![0u64; bins];
    for &v in x.iter().filter(|v| v.is_finite()) {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// Pearson correlation; an input with zero spread yields an error.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { n: x.len(), min: 2 });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Degenerate("zero variance"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Row-major `k x k` correlation matrix of the given columns.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Result<Vec<f64>, StatsError> {
    let k = columns.len();
    let mut c = vec![0.0; k * k];
    for i in 0..k {
        c[i * k + i] = 1.0;
        for j in i + 1..k {
            let r = correlation(&columns[i], &columns[j])?;
            c[i * k + j] = r;
            c[j * k + i] = r;
        }
    }
    Ok(c)
}

/// Straight-line fit `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    /// `slope / slope_se`.
    pub t_statistic: f64,
}

/// Weighted least squares with known per-point standard errors `sigma`
/// (weights `1/sigma^2`); the slope error is the model-based one.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit, StatsError> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len().min(sigma.len())));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { n: x.len(), min: 2 });
    }
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&a, &b), &s) in x.iter().zip(y).zip(sigma) {
        if !(s > 0.0) {
            return Err(StatsError::Degenerate("nonpositive standard error"));
        }
        let w = 1.0 / (s * s);
        sw += w;
        swx += w * a;
        swy += w * b;
        swxx += w * a * a;
        swxy += w * a * b;
    }
    let det = sw * swxx - swx * swx;
    if det <= 0.0 {
        return Err(StatsError::Degenerate("abscissae coincide"));
    }
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swy - slope * swx) / sw;
    let slope_se = libm::sqrt(sw / det);
    Ok(LinearFit { intercept, slope, slope_se, t_statistic: slope / slope_se })
}

/// Ordinary least squares with the residual-based slope error.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { n, min: 3 });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Degenerate("abscissae coincide"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let slope_se = libm::sqrt(rss / (n - 2) as f64 / sxx);
    let t = if slope_se > 0.0 { slope / slope_se } else { f64::INFINITY * slope.signum() };
    Ok(LinearFit { intercept, slope, slope_se, t_statistic: t })
}
