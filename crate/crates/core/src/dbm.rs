//! Matrix Ornstein-Uhlenbeck flow, coupled eigenvalue Dyson Brownian motion,
//! the interpolation derivative `u_k(t)` and the characteristic flow `z_t`.
//!
//! Eigenvalue paths follow
//! `d lambda_k = sqrt(2 / (beta N)) dB_k + ((1/N) sum_{l != k} 1/(lambda_k - lambda_l) - lambda_k / 2) dt`.
//! One step integrates the linear term exactly, treats the repulsion between
//! nearest neighbours implicitly and everything else explicitly:
//! `y - dt I_near(y) = e^{-dt/2} lambda + dt I_far(lambda) + sigma dB`.
//! The implicit part is the minimizer of a strictly convex barrier function on
//! the ordered chamber, so every step preserves the ordering. All tracked paths
//! of a coupled run consume the same Brownian increments, and `u` is advanced by
//! the exact derivative of the step map.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ensembles::{sample_wigner, EnsembleError, EnsembleSpec, Entries, MatrixSample};
use crate::rng::{self, StreamRng};
use crate::spectral::{m_sc_complex, Energy};

/// Maximum bridge subdivision depth of one main step.
pub const MAX_HALVINGS: u32 = 20;
/// Steps are subdivided while `dt > STIFFNESS * N * g2^2`, with `g2` the
/// smallest second-neighbour distance of the endpoint paths, so that the
/// explicit part of the step stays contractive.
pub const STIFFNESS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbmError {
    #[error("{which} is not strictly increasing at index {index}")]
    Unordered { which: &'static str, index: usize },
    #[error("paths have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("collision at t = {t}: gap {gap} below floor after {halvings} halvings")]
    Collision { t: f64, gap: f64, halvings: u32 },
    #[error("state carries no interpolated path or derivative")]
    MissingDerivative,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Coupled state: the GOE-started path `x`, the Wigner-started path `y`, and
/// optionally one interpolated path `lambda_nu` with its `nu`-derivative `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub nu: Option<f64>,
    pub lambda_nu: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
}

fn check_increasing(v: &[f64], which: &'static str) -> Result<(), DbmError> {
    match v.windows(2).position(|w| !(w[0] < w[1])) {
        Some(i) => Err(DbmError::Unordered { which, index: i + 1 }),
        None => Ok(()),
    }
}

impl FlowState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, DbmError> {
        if x.len() != y.len() {
            return Err(DbmError::LengthMismatch(x.len(), y.len()));
        }
        check_increasing(&x, "x")?;
        check_increasing(&y, "y")?;
        Ok(FlowState { t: 0.0, x, y, nu: None, lambda_nu: None, u: None })
    }

    /// Adds the path started at `nu x + (1 - nu) y` with `u(0) = x - y`.
    pub fn with_nu(mut self, nu: f64) -> Self {
        let lambda = self.x.iter().zip(&self.y).map(|(a, b)| nu * a + (1.0 - nu) * b).collect();
        let u = self.x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
        self.nu = Some(nu);
        self.lambda_nu = Some(lambda);
        self.u = Some(u);
        self
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Integration parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbmConfig {
    pub n: usize,
    /// Final time is `N^{-epsilon}`.
    pub epsilon: f64,
    /// Base step, used once `t >= 1/N`; before that the step is `dt / N`.
    pub dt: f64,
    pub collision_floor: f64,
    pub seed: u64,
    /// 1 for real symmetric, 2 for Hermitian dynamics.
    pub beta: f64,
}

impl DbmConfig {
    pub fn new(n: usize, epsilon: f64, seed: u64) -> Self {
        DbmConfig { n, epsilon, dt: 1e-3, collision_floor: 1e-12 / n as f64, seed, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<(), DbmError> {
        if self.n == 0 {
            return Err(DbmError::Config("N must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DbmError::Config("epsilon must lie in (0, 1)"));
        }
        if !(self.dt > 0.0) {
            return Err(DbmError::Config("dt must be positive"));
        }
        if !(self.collision_floor > 0.0) {
            return Err(DbmError::Config("collision_floor must be positive"));
        }
        if self.beta != 1.0 && self.beta != 2.0 {
            return Err(DbmError::Config("beta must be 1 or 2"));
        }
        Ok(())
    }

    /// `tau = N^{-epsilon}`.
    pub fn tau(&self) -> f64 {
        libm::pow(self.n as f64, -self.epsilon)
    }

    /// Noise amplitude `sqrt(2 / (beta N))`.
    pub fn sigma(&self) -> f64 {
        libm::sqrt(2.0 / (self.beta * self.n as f64))
    }

    /// Equal main steps of at most `dt` covering `[0, t_end]`.
    pub fn schedule(&self, t_end: f64) -> Vec<f64> {
        if !(t_end > 0.0) {
            return Vec::new();
        }
        let count = libm::ceil(t_end / self.dt).max(1.0) as usize;
        vec![t_end / count as f64; count]
    }
}

/// `e^{-t/2} m0 + sqrt(1 - e^{-t}) G` with `G` an independent Gaussian matrix
/// of the same symmetry class, sampled from `seed`.
pub fn matrix_ou_transition(m0: &MatrixSample, t: f64, seed: u64) -> Result<MatrixSample, DbmError> {
    if t == 0.0 {
        return Ok(m0.clone());
    }
    if !(t > 0.0) {
        return Err(DbmError::Config("OU time must be nonnegative"));
    }
    let spec = EnsembleSpec::new(m0.symmetry(), crate::ensembles::EntryLaw::gaussian(), m0.n);
    let g = sample_wigner(&spec, seed)?;
    let a = libm::exp(-0.5 * t);
    let b = libm::sqrt(-libm::expm1(-t));
    let entries = match (&m0.entries, g.entries) {
        (Entries::Real(w), Entries::Real(h)) => Entries::Real(w.iter().zip(h).map(|(w, h)| a * w + b * h).collect()),
        (Entries::Complex(w), Entries::Complex(h)) => {
            Entries::Complex(w.iter().zip(h).map(|(w, h)| w * a + h * b).collect())
        }
        _ => unreachable!("Gaussian draw has the symmetry of m0"),
    };
    Ok(MatrixSample { n: m0.n, entries, seed: Some(seed), spec: m0.spec.clone() })
}

/// `(1/N) sum_{l != k} 1 / (v_k - v_l)`.
fn interaction(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..n {
        let vk = v[k];
        let mut acc = out[k];
        for l in k + 1..n {
            let inv = 1.0 / (vk - v[l]);
            acc += inv;
            out[l] -= inv;
        }
        out[k] = acc;
    }
    let inv_n = 1.0 / n as f64;
    out.iter_mut().for_each(|o| *o *= inv_n);
}

/// Interaction with the nearest-neighbour terms removed.
fn far_interaction(v: &[f64], out: &mut [f64]) {
    interaction(v, out);
    let inv_n = 1.0 / v.len() as f64;
    for k in 0..v.len().saturating_sub(1) {
        let inv = inv_n / (v[k + 1] - v[k]);
        out[k] += inv;
        out[k + 1] -= inv;
    }
}

/// `-(1/N) sum_{|l - k| >= 2} (u_k - u_l) / (lambda_k - lambda_l)^2`.
fn far_jacobian(lambda: &[f64], u: &[f64], out: &mut [f64]) {
    let n = lambda.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..n {
        let (lk, uk) = (lambda[k], u[k]);
        let mut acc = out[k];
        for l in k + 2..n {
            let d = lk - lambda[l];
            let c = (uk - u[l]) / (d * d);
            acc -= c;
            out[l] += c;
        }
        out[k] = acc;
    }
    let inv_n = 1.0 / n as f64;
    out.iter_mut().for_each(|o| *o *= inv_n);
}

/// Smallest gap, or the offending gap if the vector is not strictly
/// increasing above `floor`.
fn min_gap(v: &[f64], floor: f64) -> Result<f64, f64> {
    let mut g = f64::INFINITY;
    for w in v.windows(2) {
        let d = w[1] - w[0];
        if !(d >= floor) {
            return Err(d);
        }
        g = g.min(d);
    }
    Ok(g)
}

/// Tridiagonal matrix `I + (dt/N) L(y)` of the implicit part, `L` the graph
/// Laplacian of the chain with weights `1 / (y_{k+1} - y_k)^2`.
struct NewtonMatrix {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl NewtonMatrix {
    fn at(y: &[f64], dt: f64) -> Self {
        let n = y.len();
        let c = dt / n as f64;
        let mut diag = vec![1.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            let d = y[k + 1] - y[k];
            let w = c / (d * d);
            diag[k] += w;
            diag[k + 1] += w;
            off[k] = -w;
        }
        NewtonMatrix { diag, off }
    }

    /// Solves in place (symmetric, diagonally dominant: no pivoting needed).
    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        if n == 0 {
            return;
        }
        let mut c = vec![0.0; n];
        let mut denom = self.diag[0];
        b[0] /= denom;
        for k in 1..n {
            c[k - 1] = self.off[k - 1] / denom;
            denom = self.diag[k] - self.off[k - 1] * c[k - 1];
            b[k] = (b[k] - self.off[k - 1] * b[k - 1]) / denom;
        }
        for k in (0..n - 1).rev() {
            b[k] -= c[k] * b[k + 1];
        }
    }
}

/// Solves `y - dt I_near(y) = c` by damped Newton on
/// `|y - c|^2 / 2 - (dt/N) sum_k log(y_{k+1} - y_k)`, starting from the ordered
/// point `start`.
fn solve_near(c: &[f64], start: Vec<f64>, dt: f64) -> Option<Vec<f64>> {
    let n = c.len();
    let w = dt / n as f64;
    let objective = |y: &[f64]| -> f64 {
        let quad: f64 = y.iter().zip(c).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        let barrier: f64 = y.windows(2).map(|p| libm::log(p[1] - p[0])).sum();
        quad - w * barrier
    };
    let gradient = |y: &[f64], g: &mut [f64]| -> f64 {
        let mut m = 0.0f64;
        for k in 0..n {
            let mut gk = y[k] - c[k];
            if k > 0 {
                gk -= w / (y[k] - y[k - 1]);
            }
            if k + 1 < n {
                gk += w / (y[k + 1] - y[k]);
            }
            g[k] = gk;
            m = m.max(gk.abs());
        }
        m
    };
    let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut y = start;
    let mut f = objective(&y);
    let mut grad = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut gmax = gradient(&y, &mut grad);
    for _ in 0..NEWTON_ITERATIONS {
        let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
        NewtonMatrix::at(&y, dt).solve(&mut step);
        if gmax <= NEWTON_TOL * scale {
            // inside the quadratic basin: one more full step reaches rounding level
            let last: Vec<f64> = y.iter().zip(&step).map(|(a, p)| a + p).collect();
            return Some(if last.windows(2).all(|p| p[1] > p[0]) { last } else { y });
        }
        let slope: f64 = grad.iter().zip(&step).map(|(g, p)| g * p).sum();
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, p)| a + alpha * p).collect();
            if trial.windows(2).all(|p| p[1] > p[0]) {
                // objective decrease, or residual decrease once the objective
                // no longer resolves the progress
                let ft = objective(&trial);
                let gt = gradient(&trial, &mut trial_grad);
                if ft <= f + 1e-4 * alpha * slope || gt <= (1.0 - 1e-4 * alpha) * gmax {
                    y = trial;
                    f = ft;
                    gmax = gt;
                    core::mem::swap(&mut grad, &mut trial_grad);
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-30 {
                return None;
            }
        }
    }
    None
}

/// Residual below which the implicit solve takes a final full Newton step and
/// stops, relative to the largest `|c_k|`.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iterations allowed per implicit solve.
pub const NEWTON_ITERATIONS: usize = 100;

/// One step of a single path; `None` when the implicit solve fails.
fn path_step(v: &[f64], noise: &[f64], sigma_sqrt_dt: f64, dt: f64, scratch: &mut [f64]) -> Option<Vec<f64>> {
    far_interaction(v, scratch);
    let decay = libm::exp(-0.5 * dt);
    let c: Vec<f64> = v
        .iter()
        .zip(scratch.iter())
        .zip(noise)
        .map(|((&x, &i), &xi)| decay * x + dt * i + sigma_sqrt_dt * xi)
        .collect();
    if c.len() < 2 {
        return Some(c);
    }
    // explicit predictor as starting point when it is ordered
    let w = dt / v.len() as f64;
    let predictor: Vec<f64> = (0..v.len())
        .map(|k| {
            let mut p = c[k];
            if k > 0 {
                p += w / (v[k] - v[k - 1]);
            }
            if k + 1 < v.len() {
                p -= w / (v[k + 1] - v[k]);
            }
            p
        })
        .collect();
    let start = if predictor.windows(2).all(|p| p[1] > p[0]) { predictor } else { v.to_vec() };
    solve_near(&c, start, dt)
}

/// Derivative of the step map along `nu`: solves
/// `(I + (dt/N) L(lambda_next)) u_next = e^{-dt/2} u + dt J_far(lambda) u`,
/// where `lambda` is the interpolated path before the step.
pub fn u_derivative_step(state: &FlowState, lambda_next: &[f64], dt: f64) -> Result<Vec<f64>, DbmError> {
    let (lambda, u) = match (&state.lambda_nu, &state.u) {
        (Some(l), Some(u)) => (l, u),
        _ => return Err(DbmError::MissingDerivative),
    };
    if lambda_next.len() != u.len() {
        return Err(DbmError::LengthMismatch(lambda_next.len(), u.len()));
    }
    let mut rhs = vec![0.0; u.len()];
    far_jacobian(lambda, u, &mut rhs);
    let decay = libm::exp(-0.5 * dt);
    rhs.iter_mut().zip(u).for_each(|(r, &uk)| *r = decay * uk + dt * *r);
    NewtonMatrix::at(lambda_next, dt).solve(&mut rhs);
    Ok(rhs)
}

/// Advances every tracked path by `dt` with the standard normal vector
/// `noise` (Brownian increment `sqrt(dt) noise`). The increment is split by a
/// Brownian bridge into two half steps, with `bridge` supplying the extra
/// draws, when the explicit part is too stiff for the current configuration,
/// when an implicit solve fails, or when a gap falls below the collision
/// floor; after [`MAX_HALVINGS`] levels a failure is reported.
pub fn dbm_eigen_step(
    state: &FlowState,
    cfg: &DbmConfig,
    noise: &[f64],
    dt: f64,
    bridge: &mut StreamRng,
) -> Result<FlowState, DbmError> {
    if noise.len() != state.n() {
        return Err(DbmError::LengthMismatch(noise.len(), state.n()));
    }
    let mut scratch = vec![0.0; state.n()];
    step_rec(state, cfg, noise, dt, bridge, 0, &mut scratch)
}

fn step_rec(
    state: &FlowState,
    cfg: &DbmConfig,
    noise: &[f64],
    dt: f64,
    bridge: &mut StreamRng,
    depth: u32,
    scratch: &mut [f64],
) -> Result<FlowState, DbmError> {
    let stiff = dt
        > STIFFNESS * state.n() as f64 * {
            let g = second_neighbour_gap(state);
            g * g
        };
    if stiff && depth < MAX_HALVINGS {
        return split_step(state, cfg, noise, dt, bridge, depth + 1, scratch);
    }
    match try_step(state, cfg, noise, dt, scratch) {
        Ok(next) => Ok(next),
        Err(_) if depth < MAX_HALVINGS => split_step(state, cfg, noise, dt, bridge, depth + 1, scratch),
        Err(gap) => Err(DbmError::Collision { t: state.t, gap, halvings: depth }),
    }
}

fn try_step(state: &FlowState, cfg: &DbmConfig, noise: &[f64], dt: f64, scratch: &mut [f64]) -> Result<FlowState, f64> {
    let s = cfg.sigma() * libm::sqrt(dt);
    let mut advance = |v: &[f64]| -> Result<Vec<f64>, f64> {
        let next = path_step(v, noise, s, dt, scratch).ok_or(f64::NAN)?;
        min_gap(&next, cfg.collision_floor)?;
        Ok(next)
    };
    let x = advance(&state.x)?;
    let y = advance(&state.y)?;
    let lambda = match &state.lambda_nu {
        Some(l) => Some(advance(l)?),
        None => None,
    };
    let u = match (&state.u, &lambda) {
        (Some(_), Some(next)) => Some(u_derivative_step(state, next, dt).map_err(|_| f64::NAN)?),
        _ => None,
    };
    Ok(FlowState { t: state.t + dt, x, y, nu: state.nu, lambda_nu: lambda, u })
}

/// Replaces one step by two half steps whose Brownian increments sum to the
/// original one (Brownian bridge).
fn split_step(
    state: &FlowState,
    cfg: &DbmConfig,
    noise: &[f64],
    dt: f64,
    bridge: &mut StreamRng,
    depth: u32,
    scratch: &mut [f64],
) -> Result<FlowState, DbmError> {
    let zeta: Vec<f64> = (0..noise.len()).map(|_| bridge.sample(StandardNormal)).collect();
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let first: Vec<f64> = noise.iter().zip(&zeta).map(|(a, b)| r * (a + b)).collect();
    let second: Vec<f64> = noise.iter().zip(&zeta).map(|(a, b)| r * (a - b)).collect();
    let mid = step_rec(state, cfg, &first, 0.5 * dt, bridge, depth, scratch)?;
    step_rec(&mid, cfg, &second, 0.5 * dt, bridge, depth, scratch)
}

/// Smallest `v_{k+2} - v_k` over the two endpoint paths. The interpolated
/// path is left out so that the step sequence does not depend on `nu`.
fn second_neighbour_gap(state: &FlowState) -> f64 {
    [&state.x, &state.y].into_iter().flat_map(|v| v.windows(3).map(|w| w[2] - w[0])).fold(f64::INFINITY, f64::min)
}

/// Runs the coupled system from `state` (assumed at `t = 0`) to `t_end`,
/// calling `observe` after every accepted main step. Main step `j` draws its
/// noise from stream `j` of `cfg.seed`, so the Brownian path does not depend on
/// which paths are tracked.
pub fn run_coupled_with<F: FnMut(&FlowState)>(
    cfg: &DbmConfig,
    mut state: FlowState,
    t_end: f64,
    mut observe: F,
) -> Result<FlowState, DbmError> {
    cfg.validate()?;
    if state.n() != cfg.n {
        return Err(DbmError::LengthMismatch(state.n(), cfg.n));
    }
    check_increasing(&state.x, "x")?;
    check_increasing(&state.y, "y")?;
    let start = state.t;
    let steps = cfg.schedule(t_end);
    let mut noise = vec![0.0; cfg.n];
    let mut elapsed = 0.0;
    for (j, &dt) in steps.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, j as u64);
        noise.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
        state = dbm_eigen_step(&state, cfg, &noise, dt, &mut r)?;
        elapsed += dt;
        state.t = start + elapsed;
        observe(&state);
    }
    Ok(state)
}

pub fn run_coupled(cfg: &DbmConfig, state: FlowState, t_end: f64) -> Result<FlowState, DbmError> {
    run_coupled_with(cfg, state, t_end, |_| {})
}

/// `sum_k u_k / (lambda_k - z)`, the quantity transported along `z_t`.
pub fn transported_observable(state: &FlowState, z: Complex64) -> Result<Complex64, DbmError> {
    let (lambda, u) = match (&state.lambda_nu, &state.u) {
        (Some(l), Some(u)) => (l, u),
        _ => return Err(DbmError::MissingDerivative),
    };
    Ok(lambda.iter().zip(u).map(|(&l, &uk)| Complex64::new(uk, 0.0) / (l - z)).sum())
}

/// `f_t(z) = e^{-t/2} sum_k u_k(t) / (lambda_k(t) - z)`.
pub fn observable_f(state: &FlowState, z: Energy) -> Result<Complex64, DbmError> {
    Ok(transported_observable(state, z.z())? * libm::exp(-0.5 * state.t))
}

/// `z_t = (e^{t/2}(z + sqrt(z^2 - 4)) + e^{-t/2}(z - sqrt(z^2 - 4))) / 2`,
/// evaluated as `-(e^{t/2} / m + e^{-t/2} m)` with `m = m_sc(z)`.
pub fn z_flow(z: Energy, t: f64) -> Complex64 {
    if t == 0.0 {
        return z.z();
    }
    let m = m_sc_complex(z.z());
    -(m.inv() * libm::exp(0.5 * t) + m * libm::exp(-0.5 * t))
}

/// `phi = exp(c0 (log log N)^2)`.
pub fn phi(n: usize, c0: f64) -> f64 {
    let ll = libm::log(libm::log(n as f64));
    libm::exp(c0 * ll * ll)
}

/// Outcome of one coupled run.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvectionOutcome {
    /// `|sum_k u_k(t)/(lambda_k(t) - z) - sum_k u_k(0)/(lambda_k(0) - z_t)|`.
    pub residual: f64,
    /// Final state.
    pub state: FlowState,
    pub z_t: Complex64,
}

/// Runs the coupled system from `(x0, y0)` with interpolation `nu` up to `t`
/// and compares the transported observable with its value at `z_t`.
pub fn advection_residual(
    cfg: &DbmConfig,
    z: Energy,
    t: f64,
    x0: Vec<f64>,
    y0: Vec<f64>,
    nu: f64,
) -> Result<AdvectionOutcome, DbmError> {
    let start = FlowState::new(x0, y0)?.with_nu(nu);
    let z_t = z_flow(z, t);
    let before = transported_observable(&start, z_t)?;
    let end = run_coupled(cfg, start, t)?;
    let after = transported_observable(&end, z.z())?;
    Ok(AdvectionOutcome { residual: (after - before).norm(), state: end, z_t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_noise_step(state: &FlowState, cfg: &DbmConfig, dt: f64) -> FlowState {
        let noise = vec![0.0; state.n()];
        let mut r = rng::stream(0, 0);
        dbm_eigen_step(state, cfg, &noise, dt, &mut r).unwrap()
    }

    #[test]
    fn two_particle_drift() {
        let a = 0.7;
        let cfg = DbmConfig::new(2, 0.2, 1);
        let s = FlowState::new(vec![-a, a], vec![-1.0, 1.0]).unwrap();
        let dt = 1e-3;
        let out = zero_noise_step(&s, &cfg, dt);
        // b - dt / (4 b) = e^{-dt/2} a
        let c = libm::exp(-0.5 * dt) * a;
        let expected = 0.5 * (c + libm::sqrt(c * c + dt));
        assert!((out.x[1] - expected).abs() < 1e-12);
        assert!((out.x[0] + expected).abs() < 1e-12);
    }

    #[test]
    fn single_particle_is_ou() {
        let cfg = DbmConfig::new(1, 0.5, 1);
        let s = FlowState::new(vec![1.3], vec![0.4]).unwrap().with_nu(0.3);
        let mut cur = s;
        for _ in 0..500 {
            cur = zero_noise_step(&cur, &cfg, 1e-3);
        }
        let decay = libm::exp(-0.25);
        assert!((cur.x[0] - 1.3 * decay).abs() < 1e-10);
        assert!((cur.u.as_ref().unwrap()[0] - 0.9 * decay).abs() < 1e-10);
    }

    #[test]
    fn schedule_covers_interval() {
        let cfg = DbmConfig::new(100, 0.2, 0);
        let tau = cfg.tau();
        let steps = cfg.schedule(tau);
        let total: f64 = steps.iter().sum();
        assert!((total - tau).abs() < 1e-12);
        assert!(steps.iter().all(|&h| h <= 1e-3 + 1e-15));
        assert!(cfg.schedule(0.0).is_empty());
    }

    #[test]
    fn identical_starts_stay_identical() {
        let cfg = DbmConfig::new(5, 0.3, 17);
        let v = vec![-1.2, -0.5, 0.1, 0.6, 1.5];
        let s = FlowState::new(v.clone(), v).unwrap().with_nu(0.4);
        let end = run_coupled(&cfg, s, 0.05).unwrap();
        assert_eq!(end.x, end.y);
        assert!(end.u.unwrap().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn z_flow_basics() {
        let z = Energy::new(0.3, 0.2);
        assert_eq!(z_flow(z, 0.0), z.z());
        let zt = z_flow(z, 0.0 + 1e-300);
        assert!((zt - z.z()).norm() < 1e-12);
        assert!(z_flow(z, 2.0).im > 0.0);
    }

    #[test]
    fn ou_transition_identity_and_limit() {
        let spec = EnsembleSpec::new(crate::ensembles::Symmetry::Real, crate::ensembles::EntryLaw::bernoulli(), 6);
        let m0 = sample_wigner(&spec, 3).unwrap();
        assert_eq!(matrix_ou_transition(&m0, 0.0, 9).unwrap(), m0);
        let far = matrix_ou_transition(&m0, 50.0, 9).unwrap();
        let g = sample_wigner(&EnsembleSpec::goe(6), 9).unwrap();
        match (far.entries, g.entries) {
            (Entries::Real(a), Entries::Real(b)) => {
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
            }
            _ => panic!("real expected"),
        }
    }

    #[test]
    fn missing_derivative_reported() {
        let s = FlowState::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(u_derivative_step(&s, &[0.0, 1.0], 1e-3), Err(DbmError::MissingDerivative));
        assert!(FlowState::new(vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
    }
}
