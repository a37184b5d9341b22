use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;
use wignerlab_core::eigen::symmetric_eigenvalues;
use wignerlab_core::rng::derive_seed;
use wignerlab_core::spectral::{
    gamma_quantile, im_log_det, log_abs_det, semicircle_cdf, semicircle_log_potential, semicircle_quantile, Energy,
    SpectralError,
};
use wignerlab_core::stats::{self, correlation_matrix, ks_two_sample};

use super::{
    clt_checks, excluded_check, fmt_param, log_scale, new_result, sample_spectrum, summarize, ExperimentError, Runner,
};
use crate::config::{ExperimentConfig, LawConfig};
use crate::summary::{Check, Record, SuiteResult};

/// `(log|det W| + N/2) / s_N` and the variant centered by the exact finite-N
/// expansion for `sqrt(N) W`: `log|det W| + (N/2) log N - log(N!)/2 + log(N)/4`.
/// `s_N` is `sqrt(log N)` for real and `sqrt(log N / 2)` for complex matrices.
pub fn logdet_clt(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let scale = log_scale(n, ens.beta());
    let exact_shift = 0.5 * nf * nf.ln() - 0.5 * ln_gamma(nf + 1.0) + 0.25 * nf.ln();
    let mut result = new_result(suite, master);

    let raw = raw_logdets(runner, suite, &mut result, master, &ens.law, "raw");
    let mut paper = Vec::with_capacity(raw.len());
    let mut exact = Vec::with_capacity(raw.len());
    for &(replica, seed, v) in &raw {
        let p = (v + 0.5 * nf) / scale;
        let e = (v + exact_shift) / scale;
        paper.push(p);
        exact.push(e);
        result.records.push(Record { replica, seed, statistic: "paper".into(), value: p });
        result.records.push(Record { replica, seed, statistic: "exact".into(), value: e });
    }
    let s = summarize(suite, &exact)?;
    let checks = clt_checks("exact", &s, &suite.tolerances);
    result.push_summary("exact", s, checks);
    result.push_summary("paper", summarize(suite, &paper)?, Vec::new());
    let raw_values: Vec<f64> = raw.iter().map(|r| r.2).collect();
    result.push_summary("raw", summarize(suite, &raw_values)?, Vec::new());

    if let Some(other) = &suite.compare {
        let mut side = new_result(suite, master);
        let cmp = raw_logdets(runner, suite, &mut side, master, other, "raw_compare");
        result.excluded += side.excluded;
        result.records.extend(side.records);
        let cmp_values: Vec<f64> = cmp.iter().map(|r| r.2).collect();
        result.push_summary("raw_compare", summarize(suite, &cmp_values)?, Vec::new());
        let ks = ks_two_sample(&raw_values, &cmp_values).map_err(ExperimentError::stats(suite))?;
        result.scalars.push(("two_sample_distance".into(), ks.statistic));
        result.scalars.push(("two_sample_pvalue".into(), ks.p_value));
        if let Some(p) = suite.tolerances.ks_pvalue_min {
            result.checks.push(Check::above("two_sample_pvalue", ks.p_value, p));
        }
    }
    let attempted = suite.replicas * if suite.compare.is_some() { 2 } else { 1 };
    excluded_check(&mut result, &suite.tolerances, attempted);
    Ok(result)
}

/// `log|det W|` per replica of the suite's ensemble with entry law `law`;
/// singular replicas are counted as excluded.
fn raw_logdets(
    runner: &Runner,
    suite: &ExperimentConfig,
    result: &mut SuiteResult,
    master: u64,
    law: &LawConfig,
    label: &str,
) -> Vec<(usize, u64, f64)> {
    let ens = suite.ensemble.with_law(law.clone());
    let reps = runner.spectra(&ens, master, suite.replicas);
    let mut out = Vec::with_capacity(reps.len());
    for r in reps.iter() {
        match r.spectrum.as_ref().ok().and_then(|s| log_abs_det(s, Energy::real(0.0)).ok()) {
            Some(v) => {
                result.records.push(Record { replica: r.index, seed: r.seed, statistic: label.into(), value: v });
                out.push((r.index, r.seed, v));
            }
            None => result.excluded += 1,
        }
    }
    out
}

/// Normalized eigenvalue counting function below each energy.
pub fn imlog_clt(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let scale = log_scale(n, ens.beta()) / PI;
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let energies = &suite.energies;
    // a tie with an energy redraws the replica with a derived seed
    let rows = runner.map(reps.len(), |i| {
        let r = &reps[i];
        let mut seed = r.seed;
        let mut spectrum = r.spectrum.clone();
        for attempt in 1..=MAX_REDRAWS {
            let s = match &spectrum {
                Ok(s) => s,
                Err(_) => return (seed, attempt - 1, None),
            };
            let counts: Result<Vec<(f64, bool)>, SpectralError> = energies
                .iter()
                .map(|&e| {
                    // pi * c / pi need not round-trip, so the identity is
                    // checked to a few ulps and the integer count is kept
                    let c = s.count_below(e) as f64;
                    let via_log = im_log_det(s, e, 0.0)? / PI;
                    Ok((c, (via_log - c).abs() <= 4.0 * f64::EPSILON * c.max(1.0)))
                })
                .collect();
            match counts {
                Ok(c) => return (seed, attempt - 1, Some(c)),
                Err(_) => {
                    seed = derive_seed(r.seed, attempt as u64);
                    spectrum = sample_spectrum(ens, seed);
                }
            }
        }
        (seed, MAX_REDRAWS, None)
    });
    let mut per_energy: Vec<Vec<f64>> = vec![Vec::new(); energies.len()];
    let mut identity = true;
    let mut redrawn = 0usize;
    for (i, (seed, redraws, counts)) in rows.into_iter().enumerate() {
        redrawn += redraws;
        let Some(counts) = counts else {
            result.excluded += 1;
            continue;
        };
        for (j, (c, same)) in counts.into_iter().enumerate() {
            identity &= same;
            let e = energies[j];
            let v = (c - n as f64 * semicircle_cdf(e)) / scale;
            result.records.push(Record { replica: i, seed, statistic: format!("count[E={}]", fmt_param(e)), value: c });
            result.records.push(Record { replica: i, seed, statistic: format!("stat[E={}]", fmt_param(e)), value: v });
            per_energy[j].push(v);
        }
    }
    for (j, &e) in energies.iter().enumerate() {
        let label = format!("stat[E={}]", fmt_param(e));
        let s = summarize(suite, &per_energy[j])?;
        let checks = clt_checks(&label, &s, &suite.tolerances);
        result.push_summary(label, s, checks);
    }
    result.scalars.push(("redrawn".into(), redrawn as f64));
    result.checks.push(Check::flag(
        "counting_identity",
        identity,
        "im_log_det / pi == #{lambda < E} on every replica (to 4 ulp)",
    ));
    excluded_check(&mut result, &suite.tolerances, suite.replicas);
    Ok(result)
}

const MAX_REDRAWS: usize = 8;

/// `X_i = (lambda_{k_i} - gamma_{k_i}) / sqrt(4 log N / (beta (4 - gamma^2) N^2))`
/// and their empirical correlations against `1 - max theta`.
pub fn gustavsson(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let beta = ens.beta();
    let targets: Vec<(usize, f64, f64)> = suite
        .indices
        .iter()
        .map(|&k| {
            let g = gamma_quantile(k, n);
            let sd = (4.0 * nf.ln() / (beta * (4.0 - g * g) * nf * nf)).sqrt();
            (k, g, sd)
        })
        .collect();
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); targets.len()];
    for r in reps.iter() {
        let Ok(s) = &r.spectrum else {
            result.excluded += 1;
            continue;
        };
        for (j, &(k, g, sd)) in targets.iter().enumerate() {
            let x = (s.values()[k - 1] - g) / sd;
            columns[j].push(x);
            result.records.push(Record { replica: r.index, seed: r.seed, statistic: format!("X[k={k}]"), value: x });
        }
    }
    for (j, &(k, g, sd)) in targets.iter().enumerate() {
        // diagnostic only: the same mean against the (k - 1/2)/N quantile
        let shift = (g - semicircle_quantile((k as f64 - 0.5) / nf)) / sd;
        result.scalars.push((format!("mean_midpoint[k={k}]"), stats::mean(&columns[j]) + shift));
        let label = format!("X[k={k}]");
        let s = summarize(suite, &columns[j])?;
        let checks = clt_checks(&label, &s, &suite.tolerances);
        result.push_summary(label, s, checks);
    }
    let m = targets.len();
    if m >= 2 {
        let corr = correlation_matrix(&columns).map_err(ExperimentError::stats(suite))?;
        let tol = suite.tolerances.correlation_tol;
        for i in 0..m {
            for j in i + 1..m {
                let target = 1.0 - suite.theta[i..j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let name = format!("corr[k={},k={}]", targets[i].0, targets[j].0);
                let c = corr[i * m + j];
                result.scalars.push((name.clone(), c));
                result.scalars.push((format!("{name}.target"), target));
                if let Some(t) = tol {
                    result.checks.push(Check::within(name, c, [target - t, target + t]));
                }
            }
        }
        if let Some(p) = suite.tolerances.psd_tol {
            let ev = symmetric_eigenvalues(m, &corr).map_err(|e| ExperimentError::config(suite, e.to_string()))?;
            let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
            result.scalars.push(("corr_min_eigenvalue".into(), min));
            result.checks.push(Check::at_least("corr_min_eigenvalue", min, -p));
        }
    }
    excluded_check(&mut result, &suite.tolerances, suite.replicas);
    Ok(result)
}

/// `L_N(E) = log|det(W - E)| - N int log|x - E| d rho_sc` at the configured
/// energies and at `E_0 + N^{-c}` for each separation exponent `c`, with
/// empirical correlations compared to `min(1, -log|E_i - E_j| / log N)`.
pub fn logcorr(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let scale = log_scale(n, ens.beta());
    let e0 = suite.energies[0];
    let mut energies = suite.energies.clone();
    energies.extend(suite.separations.iter().map(|&c| e0 + nf.powf(-c)));
    let potentials: Vec<f64> = energies.iter().map(|&e| nf * semicircle_log_potential(e)).collect();
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let m = energies.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); m];
    for r in reps.iter() {
        let values: Option<Vec<f64>> = r.spectrum.as_ref().ok().and_then(|s| {
            energies
                .iter()
                .zip(&potentials)
                .map(|(&e, &p)| log_abs_det(s, Energy::real(e)).ok().map(|v| (v - p) / scale))
                .collect()
        });
        let Some(values) = values else {
            result.excluded += 1;
            continue;
        };
        for (j, v) in values.into_iter().enumerate() {
            result.records.push(Record { replica: r.index, seed: r.seed, statistic: format!("L[{j}]"), value: v });
            columns[j].push(v);
        }
    }
    for (j, &e) in energies.iter().enumerate() {
        result.scalars.push((format!("energy[{j}]"), e));
        result.push_summary(format!("L[{j}]"), summarize(suite, &columns[j])?, Vec::new());
    }
    if m >= 2 {
        let corr = correlation_matrix(&columns).map_err(ExperimentError::stats(suite))?;
        for i in 0..m {
            for j in i + 1..m {
                let d = (energies[i] - energies[j]).abs();
                let target = if d == 0.0 { 1.0 } else { (-d.ln() / nf.ln()).clamp(0.0, 1.0) };
                let name = format!("corr[{i},{j}]");
                let c = corr[i * m + j];
                result.scalars.push((name.clone(), c));
                result.scalars.push((format!("{name}.target"), target));
                if d == 0.0 {
                    if let Some(min) = suite.tolerances.coincident_min {
                        result.checks.push(Check::at_least(name, c, min));
                    }
                } else if let Some(t) = suite.tolerances.correlation_tol {
                    result.checks.push(Check::within(name, c, [target - t, target + t]));
                }
            }
        }
    }
    excluded_check(&mut result, &suite.tolerances, suite.replicas);
    Ok(result)
}
