//! Monte Carlo suites.
//!
//! Every replica is an independent task keyed by its seed. Replica results
//! are collected in replica order before any reduction, so summaries do not
//! depend on the number of worker threads. Spectra are cached per
//! `(ensemble, sampler, master seed)`; suites of one run that use the same
//! ensemble therefore see the same matrices.

mod advection;
mod clt;
mod scans;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use wignerlab_core::eigen;
use wignerlab_core::ensembles::{sample_gaussian_tridiagonal, sample_wigner};
use wignerlab_core::rng::derive_seed;
use wignerlab_core::spectral::{self, SpectralSample};
use wignerlab_core::stats::StatsError;

use crate::config::{EnsembleConfig, ExperimentConfig, RunConfig, Sampler, Statistic, Tolerances};
use crate::summary::{Check, StatSummary, SuiteResult};

pub use advection::advection_experiment;
pub use clt::{gustavsson, imlog_clt, logcorr, logdet_clt};
pub use scans::{
    counting_corollaries, expectation_gap, local_law_scan, regularized_logdet, rigidity_scan, variance_scan,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("suite {suite}: {message}")]
    Config { suite: String, message: String },
    #[error("suite {suite}: statistics: {source}")]
    Stats { suite: String, source: StatsError },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    pub(crate) fn config(suite: &ExperimentConfig, message: impl Into<String>) -> Self {
        ExperimentError::Config { suite: suite.name.clone(), message: message.into() }
    }

    pub(crate) fn stats(suite: &ExperimentConfig) -> impl FnOnce(StatsError) -> Self + '_ {
        move |source| ExperimentError::Stats { suite: suite.name.clone(), source }
    }
}

/// Eigenvalues of one replica, or the reason they are missing.
#[derive(Clone, Debug)]
pub struct Replica {
    pub index: usize,
    pub seed: u64,
    pub spectrum: Result<SpectralSample, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    ensemble: String,
    n: usize,
    sampler: Sampler,
    master: u64,
}

/// Worker pool plus spectrum cache.
pub struct Runner {
    pool: rayon::ThreadPool,
    threads: usize,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<Replica>>>>,
}

/// Seed of replica `index` of `ensemble` under `master`. It depends on the
/// dimension, symmetry and entry law but not on the sampler, so two suites
/// over the same ensemble see the same seeds.
pub fn replica_seed(master: u64, ensemble: &EnsembleConfig, index: usize) -> u64 {
    let digest = Sha256::digest(ensemble_tag(ensemble).as_bytes());
    let tag = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    derive_seed(derive_seed(derive_seed(master, ensemble.n as u64), tag), index as u64)
}

fn ensemble_tag(e: &EnsembleConfig) -> String {
    format!("{:?}/{}", e.symmetry, e.law.key())
}

/// Eigenvalues for one seed, by the configured sampler.
pub fn sample_spectrum(ensemble: &EnsembleConfig, seed: u64) -> Result<SpectralSample, String> {
    match ensemble.sampler {
        Sampler::Dense => {
            let spec = ensemble.spec()?;
            let m = sample_wigner(&spec, seed).map_err(|e| e.to_string())?;
            spectral::eigenvalues(&m).map_err(|e| e.to_string())
        }
        Sampler::Tridiagonal => {
            let t =
                sample_gaussian_tridiagonal(ensemble.symmetry.into(), ensemble.n, seed).map_err(|e| e.to_string())?;
            let values = eigen::tridiagonal_eigenvalues(&t).map_err(|e| e.to_string())?;
            let mut s = SpectralSample::new(values);
            s.seed = Some(seed);
            Ok(s)
        }
    }
}

/// Thread count: explicit request, then `WIGNERLAB_THREADS`, then the
/// hardware parallelism.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .filter(|&t| t > 0)
        .or_else(|| std::env::var("WIGNERLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&t| t > 0))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
}

impl Runner {
    pub fn new(threads: usize) -> Result<Self, ExperimentError> {
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?;
        Ok(Runner { pool, threads, cache: Mutex::new(HashMap::new()) })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `f(0), ..., f(count - 1)` evaluated on the pool, in index order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(&f).collect())
    }

    /// The first `replicas` spectra of `ensemble` under `master`, computing
    /// and caching any that are missing.
    pub fn spectra(&self, ensemble: &EnsembleConfig, master: u64, replicas: usize) -> Arc<Vec<Replica>> {
        let key = CacheKey { ensemble: ensemble_tag(ensemble), n: ensemble.n, sampler: ensemble.sampler, master };
        let have = self.cache.lock().expect("cache lock").get(&key).cloned();
        let start = have.as_ref().map_or(0, |v| v.len());
        if start >= replicas {
            let v = have.expect("cached spectra");
            return if v.len() == replicas { v } else { Arc::new(v[..replicas].to_vec()) };
        }
        let fresh = self.map(replicas - start, |i| {
            let index = start + i;
            let seed = replica_seed(master, ensemble, index);
            Replica { index, seed, spectrum: sample_spectrum(ensemble, seed) }
        });
        let mut all = have.map(|v| v.as_ref().clone()).unwrap_or_default();
        all.extend(fresh);
        let all = Arc::new(all);
        self.cache.lock().expect("cache lock").insert(key, all.clone());
        all
    }

    /// Drops all cached spectra.
    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    pub fn run_suite(&self, suite: &ExperimentConfig, master_seed: u64) -> Result<SuiteResult, ExperimentError> {
        let mut result = match suite.statistic {
            Statistic::Logdet => logdet_clt(self, suite, master_seed),
            Statistic::LogdetRegularized => regularized_logdet(self, suite, master_seed),
            Statistic::Imlogdet => imlog_clt(self, suite, master_seed),
            Statistic::Gustavsson => gustavsson(self, suite, master_seed),
            Statistic::Logcorr => logcorr(self, suite, master_seed),
            Statistic::Locallaw => local_law_scan(self, suite, master_seed),
            Statistic::Rigidity => rigidity_scan(self, suite, master_seed),
            Statistic::Advection => advection_experiment(self, suite, master_seed),
            Statistic::ExpectationGap => expectation_gap(self, suite, master_seed),
            Statistic::VarianceScan => variance_scan(self, suite, master_seed),
            Statistic::Counting => counting_corollaries(self, suite, master_seed),
        }?;
        result.finish();
        Ok(result)
    }

    pub fn run_all(&self, cfg: &RunConfig) -> Result<Vec<SuiteResult>, ExperimentError> {
        cfg.suites.iter().map(|s| self.run_suite(s, cfg.suite_seed(s))).collect()
    }
}

pub(crate) fn new_result(suite: &ExperimentConfig, master: u64) -> SuiteResult {
    SuiteResult::new(&suite.name, suite.statistic.as_str(), suite.replicas, master)
}

pub(crate) fn summarize(suite: &ExperimentConfig, values: &[f64]) -> Result<StatSummary, ExperimentError> {
    StatSummary::of(values, suite.bins).map_err(ExperimentError::stats(suite))
}

/// Mean and variance bands plus the KS distance to the standard normal law.
pub(crate) fn clt_checks(label: &str, s: &StatSummary, tol: &Tolerances) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(b) = tol.mean {
        out.push(Check::within(format!("{label}.mean"), s.mean, b));
    }
    if let Some(b) = tol.variance {
        out.push(Check::within(format!("{label}.variance"), s.variance, b));
    }
    // below the KS minimum sample size the distance is absent and not checked
    if let (Some(m), Some(d)) = (tol.ks_distance_max, s.ks_distance) {
        out.push(Check::below(format!("{label}.ks_distance"), d, m));
    }
    out
}

/// Fails the suite when too many replicas had to be dropped.
pub(crate) fn excluded_check(result: &mut SuiteResult, tol: &Tolerances, attempted: usize) {
    let fraction = if attempted == 0 { 0.0 } else { result.excluded as f64 / attempted as f64 };
    result.scalars.push(("excluded_fraction".into(), fraction));
    if let Some(m) = tol.excluded_fraction_max {
        result.checks.push(Check::at_most("excluded_fraction", fraction, m));
    }
}

/// `sqrt(log N)` for real and `sqrt(log N / 2)` for complex ensembles; one at
/// `N = 1`, where the logarithm vanishes.
pub(crate) fn log_scale(n: usize, beta: f64) -> f64 {
    if n < 2 {
        1.0
    } else {
        ((n as f64).ln() / beta).sqrt()
    }
}

/// Compact label for a real parameter.
pub(crate) fn fmt_param(x: f64) -> String {
    format!("{x}")
}
