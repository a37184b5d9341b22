use num_complex::Complex64;
use wignerlab_core::dbm::{phi, run_coupled, transported_observable, z_flow, DbmConfig, FlowState};
use wignerlab_core::rng::derive_seed;
use wignerlab_core::spectral::{eta0, Energy};

use super::{excluded_check, fmt_param, new_result, summarize, ExperimentError, Runner};
use crate::config::{ExperimentConfig, LawConfig};
use crate::summary::{Check, Record, SuiteResult};

/// `sum_k log|v_k - z|`.
fn log_sum(v: &[f64], z: Complex64) -> f64 {
    v.iter().map(|&l| (Complex64::new(l, 0.0) - z).norm().ln()).sum()
}

struct Row {
    replica: usize,
    seed: u64,
    /// `(D, residual)` per energy.
    values: Result<Vec<(f64, f64)>, String>,
}

/// Shared-noise coupling of a Gaussian-started and a Wigner-started path up
/// to `tau = N^{-epsilon}`:
/// `D = |[L(x(tau), z) - L(y(tau), z)] - [L(x(0), z_tau) - L(y(0), z_tau)]|`
/// with `L(v, w) = sum_k log|v_k - w|` and `z = E + i eta_0`, plus the
/// transport residual of the interpolated path.
pub fn advection_experiment(
    runner: &Runner,
    suite: &ExperimentConfig,
    master: u64,
) -> Result<SuiteResult, ExperimentError> {
    let ens = &suite.ensemble;
    let n = ens.n;
    let tol = &suite.tolerances;
    let eta = eta0(n);
    let zs: Vec<Energy> = suite.energies.iter().map(|&e| Energy::new(e, eta)).collect();
    let base = DbmConfig { dt: suite.dt, beta: ens.beta(), ..DbmConfig::new(n, suite.epsilon, 0) };
    base.validate().map_err(|e| ExperimentError::config(suite, e.to_string()))?;
    let tau = base.tau();
    let z_tau: Vec<Complex64> = zs.iter().map(|&z| z_flow(z, tau)).collect();

    let gauss = runner.spectra(&ens.with_law(LawConfig::Gaussian), master, suite.replicas);
    let wigner = runner.spectra(ens, master, suite.replicas);
    let rows: Vec<Row> = runner.map(suite.replicas, |i| {
        let (g, w) = (&gauss[i], &wigner[i]);
        let seed = derive_seed(w.seed, 1);
        let values = (|| {
            let x0 = g.spectrum.as_ref().map_err(Clone::clone)?.values().to_vec();
            let y0 = w.spectrum.as_ref().map_err(Clone::clone)?.values().to_vec();
            let start = FlowState::new(x0, y0).map_err(|e| e.to_string())?.with_nu(suite.nu);
            let before: Vec<(f64, Complex64)> = z_tau
                .iter()
                .map(|&zt| {
                    let d = log_sum(&start.x, zt) - log_sum(&start.y, zt);
                    transported_observable(&start, zt).map(|f| (d, f))
                })
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let end = run_coupled(&DbmConfig { seed, ..base }, start, tau).map_err(|e| e.to_string())?;
            zs.iter()
                .zip(&before)
                .map(|(z, &(d0, f0))| {
                    let d = log_sum(&end.x, z.z()) - log_sum(&end.y, z.z());
                    let f = transported_observable(&end, z.z()).map_err(|e| e.to_string())?;
                    Ok(((d - d0).abs(), (f - f0).norm()))
                })
                .collect()
        })();
        Row { replica: i, seed, values }
    });

    let mut result = new_result(suite, master);
    let m = zs.len();
    let mut ds: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); m];
    for row in rows {
        let Ok(values) = row.values else {
            result.excluded += 1;
            continue;
        };
        for (j, (d, r)) in values.into_iter().enumerate() {
            let e = fmt_param(suite.energies[j]);
            result.records.push(Record {
                replica: row.replica,
                seed: row.seed,
                statistic: format!("D[E={e}]"),
                value: d,
            });
            result.records.push(Record {
                replica: row.replica,
                seed: row.seed,
                statistic: format!("residual[E={e}]"),
                value: r,
            });
            ds[j].push(d);
            residuals[j].push(r);
        }
    }
    let bound = tol.residual_constant.map(|c| c * phi(n, tol.phi_c0.unwrap_or(1.0)) / (n as f64 * eta));
    let log_n = (n as f64).ln().max(0.0).sqrt();
    for j in 0..m {
        let e = fmt_param(suite.energies[j]);
        let s = summarize(suite, &ds[j])?;
        let mut checks = Vec::new();
        if let Some(mx) = tol.median_max {
            checks.push(Check::at_most(format!("median_D[E={e}]"), s.median, mx));
        }
        if let Some(f) = tol.median_log_factor {
            checks.push(Check::at_most(format!("median_D_log[E={e}]"), s.median, f * log_n));
        }
        result.push_summary(format!("D[E={e}]"), s, checks);

        let mut checks = Vec::new();
        if let Some(b) = bound {
            let within = residuals[j].iter().filter(|&&r| r <= b).count() as f64 / residuals[j].len().max(1) as f64;
            result.scalars.push((format!("residual_bound[E={e}]"), b));
            result.scalars.push((format!("residual_fraction[E={e}]"), within));
            if let Some(min) = tol.residual_fraction_min {
                checks.push(Check::at_least(format!("residual_fraction[E={e}]"), within, min));
            }
        }
        result.push_summary(format!("residual[E={e}]"), summarize(suite, &residuals[j])?, checks);
    }
    result.scalars.push(("tau".into(), tau));
    result.scalars.push(("eta0".into(), eta));
    excluded_check(&mut result, tol, suite.replicas);
    Ok(result)
}
