use wignerlab_core::spectral::{
    centering_integral, eta0, gamma_quantiles, log_abs_det, m_sc, semicircle_density, stieltjes, v_wig, Energy,
    TestFunction,
};
use wignerlab_core::stats::{self, weighted_linear_fit};

use super::{excluded_check, fmt_param, new_result, summarize, ExperimentError, Runner};
use crate::config::{EnsembleConfig, ExperimentConfig};
use crate::summary::{Check, Record, SuiteResult};

/// `g(eta_0) = sum_k (log|y_k + i eta_0| - log|y_k|) - centering_integral(eta_0, N)`
/// normalized by `sqrt(log N)`, over the N-scan.
pub fn regularized_logdet(
    runner: &Runner,
    suite: &ExperimentConfig,
    master: u64,
) -> Result<SuiteResult, ExperimentError> {
    let mut result = new_result(suite, master);
    let tol = &suite.tolerances;
    let mut medians: Vec<(usize, f64, f64)> = Vec::new();
    for &n in &suite.sizes {
        let ens = suite.ensemble.with_n(n);
        let eta = eta0(n);
        let centering = centering_integral(eta, n);
        let scale = if n < 2 { 1.0 } else { (n as f64).ln().sqrt() };
        let reps = runner.spectra(&ens, master, suite.replicas);
        let label = format!("g[N={n}]");
        let mut values = Vec::with_capacity(reps.len());
        for r in reps.iter() {
            let g = r.spectrum.as_ref().ok().and_then(|s| {
                let v = s.values();
                if v.contains(&0.0) {
                    return None;
                }
                Some(v.iter().map(|&y| 0.5 * ((eta / y) * (eta / y)).ln_1p()).sum::<f64>() - centering)
            });
            match g {
                Some(g) => {
                    let x = g / scale;
                    values.push(x);
                    result.records.push(Record { replica: r.index, seed: r.seed, statistic: label.clone(), value: x });
                }
                None => result.excluded += 1,
            }
        }
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let (med, se) = (stats::median(&abs), stats::median_standard_error(&abs));
        result.scalars.push((format!("median_abs[N={n}]"), med));
        result.scalars.push((format!("median_abs_se[N={n}]"), se));
        result.scalars.push((format!("median[N={n}]"), stats::median(&values)));
        result.push_summary(label, summarize(suite, &values)?, Vec::new());
        medians.push((n, med, se));
    }
    for w in medians.windows(2) {
        let ((_, m0, s0), (n1, m1, s1)) = (w[0], w[1]);
        if let Some(k) = tol.trend_se {
            let bound = m0 + k * (s0 * s0 + s1 * s1).sqrt();
            result.checks.push(Check::at_most(format!("trend[N={n1}]"), m1, bound));
        }
    }
    if let (Some(&(n, med, _)), Some(m)) = (medians.last(), tol.median_max) {
        result.checks.push(Check::at_most(format!("median_abs[N={n}]"), med, m));
    }
    excluded_check(&mut result, tol, suite.replicas * suite.sizes.len());
    Ok(result)
}

/// Deviations of the empirical Stieltjes transform from `m_sc` on the grid
/// `energies x {N^{-a}}`.
pub fn local_law_scan(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let tol = &suite.tolerances;
    let grid: Vec<(f64, f64, Energy)> = suite
        .energies
        .iter()
        .flat_map(|&e| suite.eta_exponents.iter().map(move |&a| (e, a, Energy::new(e, nf.powf(-a)))))
        .collect();
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let mut devs: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let mut im_devs: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for r in reps.iter() {
        let Ok(s) = &r.spectrum else {
            result.excluded += 1;
            continue;
        };
        for (j, &(e, a, z)) in grid.iter().enumerate() {
            let st = stieltjes(s, z).map_err(|e| ExperimentError::config(suite, e.to_string()))?;
            let m = m_sc(z);
            let n_eta = nf * z.eta;
            let d = n_eta * (st - m).norm();
            devs[j].push(d);
            im_devs[j].push(n_eta * (st.im - m.im).abs());
            let label = format!("dev[E={},a={}]", fmt_param(e), fmt_param(a));
            result.records.push(Record { replica: r.index, seed: r.seed, statistic: label, value: d });
        }
    }
    let ll = nf.ln().ln();
    for (j, &(e, a, _)) in grid.iter().enumerate() {
        let tag = format!("E={},a={}", fmt_param(e), fmt_param(a));
        let mut checks = Vec::new();
        if let (Some(c), false) = (tol.local_law_exponent, devs[j].is_empty()) {
            let bound = nf.powf(c) * (ll * ll).exp();
            checks.push(Check::at_most(format!("p99[{tag}]"), stats::quantile(&devs[j], 0.99), bound));
        }
        let freqs: Vec<f64> = suite
            .tail_levels
            .iter()
            .map(|&k| {
                let hits = im_devs[j].iter().filter(|&&d| d >= k).count();
                hits as f64 / im_devs[j].len().max(1) as f64
            })
            .collect();
        for (&k, &f) in suite.tail_levels.iter().zip(&freqs) {
            result.scalars.push((format!("tail[{tag},K={}]", fmt_param(k)), f));
        }
        let mut order: Vec<usize> = (0..freqs.len()).collect();
        order.sort_by(|&x, &y| suite.tail_levels[x].total_cmp(&suite.tail_levels[y]));
        let monotone = order.windows(2).all(|w| freqs[w[1]] <= freqs[w[0]]);
        checks.push(Check::flag(format!("tails_monotone[{tag}]"), monotone, "nonincreasing in K"));
        result.push_summary(format!("dev[{tag}]"), summarize(suite, &devs[j])?, checks);
    }
    excluded_check(&mut result, tol, suite.replicas);
    Ok(result)
}

/// Largest normalized distance `|lambda_k - gamma_k| / (N^{-2/3 + c} min(k, N + 1 - k)^{-1/3})`.
pub fn rigidity_scan(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let tol = &suite.tolerances;
    let c = tol.rigidity_c.unwrap_or(0.1);
    let gammas = gamma_quantiles(n);
    let window = nf.powf(-2.0 / 3.0 + c);
    let weights: Vec<f64> = (1..=n).map(|k| (k.min(n + 1 - k) as f64).cbrt() / window).collect();
    let bulk = (n / 2).max(1);
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let mut ratios = Vec::new();
    let mut bulk_devs = Vec::new();
    for r in reps.iter() {
        let Ok(s) = &r.spectrum else {
            result.excluded += 1;
            continue;
        };
        let v = s.values();
        let ratio = v.iter().zip(&gammas).zip(&weights).map(|((l, g), w)| (l - g).abs() * w).fold(0.0, f64::max);
        let b = (v[bulk - 1] - gammas[bulk - 1]).abs();
        ratios.push(ratio);
        bulk_devs.push(b);
        result.records.push(Record { replica: r.index, seed: r.seed, statistic: "max_ratio".into(), value: ratio });
        result.records.push(Record { replica: r.index, seed: r.seed, statistic: "bulk_dev".into(), value: b });
    }
    let violations = ratios.iter().filter(|&&x| x > 1.0).count() as f64 / ratios.len().max(1) as f64;
    result.scalars.push(("violation_frequency".into(), violations));
    let mut checks = Vec::new();
    if let Some(m) = tol.violation_max {
        checks.push(Check::at_most("violation_frequency", violations, m));
    }
    result.push_summary("max_ratio", summarize(suite, &ratios)?, checks);
    let mut bulk_checks = Vec::new();
    if !bulk_devs.is_empty() {
        let bound = window * (bulk.min(n + 1 - bulk) as f64).powf(-1.0 / 3.0);
        bulk_checks.push(Check::at_most(format!("bulk_p99[k={bulk}]"), stats::quantile(&bulk_devs, 0.99), bound));
    }
    result.push_summary("bulk_dev", summarize(suite, &bulk_devs)?, bulk_checks);
    excluded_check(&mut result, tol, suite.replicas);
    Ok(result)
}

/// Per-replica `sum_k log|x_k + i tau|` with `tau = N^{-epsilon}`.
fn regularized_sums(
    runner: &Runner,
    suite: &ExperimentConfig,
    result: &mut SuiteResult,
    master: u64,
    ens: &EnsembleConfig,
    epsilon: f64,
    label: &str,
) -> Vec<f64> {
    let tau = (ens.n as f64).powf(-epsilon);
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut out = Vec::with_capacity(reps.len());
    for r in reps.iter() {
        match r.spectrum.as_ref().ok().and_then(|s| log_abs_det(s, Energy::new(0.0, tau)).ok()) {
            Some(v) => {
                out.push(v);
                result.records.push(Record { replica: r.index, seed: r.seed, statistic: label.into(), value: v });
            }
            None => result.excluded += 1,
        }
    }
    out
}

/// Difference of the expected regularized log-determinants of two ensembles
/// over the N-scan, with a weighted trend fit in `log N`.
pub fn expectation_gap(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let mut result = new_result(suite, master);
    let tol = &suite.tolerances;
    let (mut xs, mut gaps, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &suite.sizes {
        let a_label = format!("A[N={n}]");
        let b_label = format!("B[N={n}]");
        let ens_a = suite.ensemble.with_n(n);
        let ens_b = ens_a.with_law(suite.compare.clone().expect("compare law resolved"));
        let a = regularized_sums(runner, suite, &mut result, master, &ens_a, suite.epsilon, &a_label);
        let b = regularized_sums(runner, suite, &mut result, master, &ens_b, suite.epsilon, &b_label);
        let gap = stats::mean(&a) - stats::mean(&b);
        let var_a = if a.len() > 1 { stats::variance(&a) } else { 0.0 };
        let var_b = if b.len() > 1 { stats::variance(&b) } else { 0.0 };
        let se = (var_a / a.len().max(1) as f64 + var_b / b.len().max(1) as f64).sqrt();
        result.scalars.push((format!("gap[N={n}]"), gap));
        result.scalars.push((format!("gap_se[N={n}]"), se));
        result.push_summary(a_label, summarize(suite, &a)?, Vec::new());
        result.push_summary(b_label, summarize(suite, &b)?, Vec::new());
        if let Some(m) = tol.gap_max {
            result.checks.push(Check::at_most(format!("abs_gap[N={n}]"), gap.abs(), m));
        }
        xs.push((n as f64).ln());
        gaps.push(gap);
        ses.push(se);
    }
    if xs.len() >= 2 && ses.iter().all(|&s| s > 0.0) {
        let fit = weighted_linear_fit(&xs, &gaps, &ses).map_err(ExperimentError::stats(suite))?;
        result.scalars.push(("trend_slope".into(), fit.slope));
        result.scalars.push(("trend_slope_se".into(), fit.slope_se));
        result.scalars.push(("trend_t".into(), fit.t_statistic));
        if let Some(t) = tol.slope_t_max {
            result.checks.push(Check::below("trend_t", fit.t_statistic, t));
        }
    }
    excluded_check(&mut result, tol, 2 * suite.replicas * suite.sizes.len());
    Ok(result)
}

/// Variance of `sum_k log|x_k + i N^{-epsilon}|` across `sizes x epsilons`.
pub fn variance_scan(runner: &Runner, suite: &ExperimentConfig, master: u64) -> Result<SuiteResult, ExperimentError> {
    let mut result = new_result(suite, master);
    let tol = &suite.tolerances;
    let (mut xs, mut vars, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    let mut c_hat = 0.0f64;
    let mut macroscopic: Option<f64> = None;
    for &n in &suite.sizes {
        for &eps in &suite.epsilons {
            let label = format!("S[N={n},eps={}]", fmt_param(eps));
            let v = regularized_sums(runner, suite, &mut result, master, &suite.ensemble.with_n(n), eps, &label);
            let s = summarize(suite, &v)?;
            let x = eps * (n as f64).ln();
            result.scalars.push((format!("variance[N={n},eps={}]", fmt_param(eps)), s.variance));
            c_hat = c_hat.max(s.variance / (1.0 + x));
            if eps == 0.0 {
                macroscopic = Some(s.variance);
            }
            xs.push(x);
            vars.push(s.variance);
            ses.push(s.variance_se);
            result.push_summary(label, s, Vec::new());
        }
    }
    result.scalars.push(("c_hat".into(), c_hat));
    if let Some(m) = tol.variance_c_max {
        result.checks.push(Check::at_most("c_hat", c_hat, m));
    }
    if xs.len() >= 2 && ses.iter().all(|&s| s > 0.0) && xs.iter().any(|&x| x != xs[0]) {
        let fit = weighted_linear_fit(&xs, &vars, &ses).map_err(ExperimentError::stats(suite))?;
        result.scalars.push(("slope".into(), fit.slope));
        result.scalars.push(("slope_se".into(), fit.slope_se));
        result.scalars.push(("intercept".into(), fit.intercept));
    }
    if let Some(var0) = macroscopic {
        let kappa4 = suite.ensemble.spec().map_err(|e| ExperimentError::config(suite, e))?.law.moments().kappa4();
        let v = v_wig(&TestFunction::log_modulus(1.0), kappa4)
            .map_err(|e| ExperimentError::config(suite, e.to_string()))?;
        result.scalars.push(("v_wig_tau1".into(), v));
        if let Some(t) = tol.vwig_rel_tol {
            result.checks.push(Check::at_most("v_wig_rel_error", (var0 / v - 1.0).abs(), t));
        }
    }
    excluded_check(&mut result, tol, suite.replicas * suite.sizes.len() * suite.epsilons.len());
    Ok(result)
}

/// Empty-interval frequency at width `N^{-micro_exponent}` and mean count in
/// a bulk window of width `bulk_width / N`, both centered at the first energy.
pub fn counting_corollaries(
    runner: &Runner,
    suite: &ExperimentConfig,
    master: u64,
) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let nf = n as f64;
    let tol = &suite.tolerances;
    let e = suite.energies[0];
    let micro = 0.5 * nf.powf(-suite.micro_exponent);
    let half = 0.5 * suite.bulk_width / nf;
    let reps = runner.spectra(ens, master, suite.replicas);
    let mut result = new_result(suite, master);
    let (mut empty, mut counts) = (Vec::new(), Vec::new());
    for r in reps.iter() {
        let Ok(s) = &r.spectrum else {
            result.excluded += 1;
            continue;
        };
        let m = s.count_in(e - micro, e + micro) as f64;
        let c = s.count_in(e - half, e + half) as f64;
        empty.push(if m == 0.0 { 1.0 } else { 0.0 });
        counts.push(c);
        result.records.push(Record { replica: r.index, seed: r.seed, statistic: "micro_count".into(), value: m });
        result.records.push(Record { replica: r.index, seed: r.seed, statistic: "bulk_count".into(), value: c });
    }
    let empty_fraction = stats::mean(&empty);
    let expected = nf * 2.0 * half * semicircle_density(e);
    let ratio = stats::mean(&counts) / expected;
    result.scalars.push(("empty_fraction".into(), empty_fraction));
    result.scalars.push(("bulk_expected".into(), expected));
    result.scalars.push(("bulk_ratio".into(), ratio));
    if let Some(m) = tol.empty_fraction_min {
        result.checks.push(Check::at_least("empty_fraction", empty_fraction, m));
    }
    let mut checks = Vec::new();
    if let Some(b) = tol.count_ratio {
        checks.push(Check::within("bulk_ratio", ratio, b));
    }
    result.push_summary("bulk_count", summarize(suite, &counts)?, checks);
    excluded_check(&mut result, tol, suite.replicas);
    Ok(result)
}
