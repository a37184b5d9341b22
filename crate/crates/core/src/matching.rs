//! Moment matching by Gaussian convolution.
//!
//! Given target third and fourth moments and a mixing weight `gamma`, build a
//! law `xi_gamma` such that `sqrt(1 - gamma) xi_gamma + sqrt(gamma) G` has mean
//! 0, variance 1, the target third moment, and a fourth moment within `O(gamma)`
//! of the target. `xi_gamma` is the minimal-support (three-atom) solution of
//! the reduced moment problem, with an atom at the origin.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::ensembles::{entry_law_moments, Atom, EnsembleError, EntryLaw, Moments};

/// Default cap on the target fourth moment.
pub const DEFAULT_M4_CAP: f64 = 100.0;
/// Default constant in the order-four tolerance `C * tau`.
pub const DEFAULT_MATCH_CONSTANT: f64 = 6.0;
/// Tolerance for orders one to three in [`verify_match`].
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("inadmissible targets: m4 - m3^2 - 1 = {slack} < 0 (m3 = {m3}, m4 = {m4})")]
    Inadmissible { m3: f64, m4: f64, slack: f64 },
    #[error("target fourth moment {m4} exceeds the cap {cap}")]
    AboveCap { m4: f64, cap: f64 },
    #[error("mixing weight must lie in [0, 1), got {0}")]
    BadGamma(f64),
    #[error("reduced moments (m3 = {m3}, m4 = {m4}) admit no three-atom law")]
    Infeasible { m3: f64, m4: f64 },
    #[error(transparent)]
    Law(#[from] EnsembleError),
}

/// Targets of the construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchSpec {
    pub m3: f64,
    pub m4: f64,
    pub gamma: f64,
    pub m4_cap: f64,
}

impl MatchSpec {
    pub fn new(m3: f64, m4: f64, gamma: f64) -> Self {
        MatchSpec { m3, m4, gamma, m4_cap: DEFAULT_M4_CAP }
    }

    /// Targets read off `law`, with `gamma = 1 - exp(-tau)`.
    pub fn from_law_and_time(law: &EntryLaw, tau: f64) -> Self {
        let m = law.moments();
        Self::new(m.m3, m.m4, -libm::expm1(-tau))
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let slack = self.m4 - self.m3 * self.m3 - 1.0;
        if !(slack >= -EXACT_TOL) {
            return Err(MatchError::Inadmissible { m3: self.m3, m4: self.m4, slack });
        }
        if self.m4 > self.m4_cap {
            return Err(MatchError::AboveCap { m4: self.m4, cap: self.m4_cap });
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(MatchError::BadGamma(self.gamma));
        }
        Ok(())
    }
}

/// Output of [`construct_matched_law`].
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedLaw {
    /// The reduced law `xi_gamma`.
    pub reduced: EntryLaw,
    /// The law of `sqrt(1 - gamma) xi_gamma + sqrt(gamma) G`.
    pub law: EntryLaw,
    /// Reduced moments before projection.
    pub reduced_m3: f64,
    pub reduced_m4: f64,
    /// Whether the reduced fourth moment was raised to the feasibility boundary.
    pub projected: bool,
    /// `m4(law) - target m4`.
    pub m4_gap: f64,
}

/// Three atoms (one at the origin) with moments `0, 1, s, v`; requires
/// `v - s^2 >= 1`.
pub fn three_atom_law(s: f64, v: f64) -> Result<Vec<Atom>, MatchError> {
    let d = v - s * s;
    if !(d >= 1.0 - EXACT_TOL) || !d.is_finite() {
        return Err(MatchError::Infeasible { m3: s, m4: v });
    }
    let d = d.max(1.0);
    // support points solve x^2 = s x + d on the nonzero atoms
    let root = libm::sqrt(s * s + 4.0 * d);
    let a = 0.5 * (s - root);
    let b = 0.5 * (s + root);
    let w = 1.0 / d;
    let p = w * b / (b - a);
    let q = -w * a / (b - a);
    let r = (1.0 - w).max(0.0);
    let mut atoms = vec![Atom::new(a, p), Atom::new(b, q)];
    if r > 0.0 {
        atoms.insert(1, Atom::new(0.0, r));
    }
    Ok(atoms)
}

pub fn construct_matched_law(spec: &MatchSpec) -> Result<MatchedLaw, MatchError> {
    spec.validate()?;
    let g = spec.gamma;
    if spec.m3 == 0.0 && spec.m4 == 3.0 {
        return Ok(MatchedLaw {
            reduced: EntryLaw::gaussian(),
            law: EntryLaw::gaussian(),
            reduced_m3: 0.0,
            reduced_m4: 3.0,
            projected: false,
            m4_gap: 0.0,
        });
    }
    let a2 = 1.0 - g;
    let reduced_m3 = spec.m3 / (a2 * libm::sqrt(a2));
    let reduced_m4 = (spec.m4 - 6.0 * g * a2 - 3.0 * g * g) / (a2 * a2);
    let floor = reduced_m3 * reduced_m3 + 1.0;
    let projected = reduced_m4 < floor;
    let v = if projected { floor } else { reduced_m4 };
    let atoms = three_atom_law(reduced_m3, v)?;
    let reduced = EntryLaw::atoms(atoms.clone())?;
    let law = EntryLaw::gaussian_mix(atoms, g)?;
    let m4_gap = law.moments().m4 - spec.m4;
    Ok(MatchedLaw { reduced, law, reduced_m3, reduced_m4, projected, m4_gap })
}

/// Per-order moment comparison of two laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchReport {
    /// `|m_k(law1) - m_k(law2)|` for `k = 1..4`.
    pub gaps: [f64; 4],
    pub tau: f64,
    pub constant: f64,
    pub pass: bool,
}

impl MatchReport {
    /// Smallest `C` with `gaps[3] <= C * tau`.
    pub fn achieved_constant(&self) -> f64 {
        self.gaps[3] / self.tau
    }
}

/// Orders one to three must agree to [`EXACT_TOL`], order four to
/// `constant * tau`.
pub fn verify_match(law1: &EntryLaw, law2: &EntryLaw, tau: f64, constant: f64) -> MatchReport {
    let gaps = moment_gaps(entry_law_moments(law1), entry_law_moments(law2));
    let pass = gaps[..3].iter().all(|&g| g <= EXACT_TOL) && gaps[3] <= constant * tau;
    MatchReport { gaps, tau, constant, pass }
}

fn moment_gaps(a: Moments, b: Moments) -> [f64; 4] {
    let (a, b) = (a.as_array(), b.as_array());
    [(a[0] - b[0]).abs(), (a[1] - b[1]).abs(), (a[2] - b[2]).abs(), (a[3] - b[3]).abs()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_fixed_point() {
        for g in [0.0, 0.3] {
            let m = construct_matched_law(&MatchSpec::new(0.0, 3.0, g)).unwrap();
            assert!(m.law.is_gaussian());
            assert_eq!(m.m4_gap, 0.0);
        }
    }

    #[test]
    fn bernoulli_boundary_at_zero_gamma() {
        let m = construct_matched_law(&MatchSpec::new(0.0, 1.0, 0.0)).unwrap();
        let mo = m.reduced.moments();
        assert!((mo.m4 - 1.0).abs() < 1e-15);
        match m.reduced.kind() {
            crate::ensembles::LawKind::Atoms(a) => {
                assert_eq!(a.len(), 2);
                assert!((a[0].value + 1.0).abs() < 1e-15 && (a[1].value - 1.0).abs() < 1e-15);
                assert!((a[0].weight - 0.5).abs() < 1e-15);
            }
            _ => panic!("expected atoms"),
        }
        assert!(!m.projected);
    }

    #[test]
    fn bernoulli_target_projects() {
        let m = construct_matched_law(&MatchSpec::new(0.0, 1.0, 0.1)).unwrap();
        assert!((m.reduced_m4 - 0.43 / 0.81).abs() < 1e-14);
        assert!(m.projected);
        assert!((m.m4_gap - 0.38).abs() < 1e-14);
        assert!(m.m4_gap <= 6.0 * 0.1);
    }

    #[test]
    fn inadmissible_rejected() {
        assert!(matches!(construct_matched_law(&MatchSpec::new(1.0, 1.5, 0.1)), Err(MatchError::Inadmissible { .. })));
        assert!(matches!(construct_matched_law(&MatchSpec::new(0.0, 200.0, 0.1)), Err(MatchError::AboveCap { .. })));
        assert!(matches!(construct_matched_law(&MatchSpec::new(0.0, 2.0, 1.0)), Err(MatchError::BadGamma(_))));
        assert!(three_atom_law(0.0, 0.5).is_err());
    }

    #[test]
    fn verify_examples() {
        let b = EntryLaw::bernoulli();
        let r = verify_match(&b, &b, 0.01, 6.0);
        assert_eq!(r.gaps, [0.0; 4]);
        assert!(r.pass);
        let r = verify_match(&EntryLaw::gaussian(), &b, 0.01, 6.0);
        assert_eq!(r.gaps[3], 2.0);
        assert!(!r.pass);
    }
}
