//! Wigner ensembles with pluggable entry laws.
//!
//! Real matrices have diagonal entries `sqrt(2/N) x_ii` and off-diagonal entries
//! `x_ij / sqrt(N)`. Complex matrices have diagonal `x_ii / sqrt(N)` and
//! off-diagonal `(x_ij + i y_ij) / sqrt(2N)`. All `x`, `y` are i.i.d. draws from
//! one [`EntryLaw`] with mean zero and unit variance.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};
use thiserror::Error;

use crate::eigen::Tridiagonal;
use crate::rng;

const MOMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("entry law is not centred: m1 = {0}")]
    NotCentred(f64),
    #[error("entry law does not have unit variance: m2 = {0}")]
    NotStandardized(f64),
    #[error("atom weights must be nonnegative and sum to 1 (got sum {sum})")]
    BadWeights { sum: f64 },
    #[error("atom list is empty")]
    NoAtoms,
    #[error("mixing weight gamma = {0} is outside [0, 1]")]
    BadGamma(f64),
    #[error("non-finite atom value {0}")]
    NonFiniteAtom(f64),
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,
}

/// One point mass of a discrete law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

impl Atom {
    pub const fn new(value: f64, weight: f64) -> Self {
        Atom { value, weight }
    }
}

/// First four raw moments of a scalar law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn as_array(&self) -> [f64; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }

    /// Fourth cumulant of a standardized law, `m4 - 3`.
    pub fn kappa4(&self) -> f64 {
        self.m4 - 3.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LawKind {
    Gaussian,
    Atoms(Vec<Atom>),
    /// `sqrt(1 - gamma) * xi + sqrt(gamma) * G` with `xi` discrete and `G`
    /// an independent standard Gaussian.
    GaussianMix {
        atoms: Vec<Atom>,
        gamma: f64,
    },
}

/// Distribution of the unscaled matrix entries.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryLaw {
    kind: LawKind,
    moments: Moments,
    subgaussian_delta: Option<f64>,
}

impl EntryLaw {
    pub fn gaussian() -> Self {
        EntryLaw {
            kind: LawKind::Gaussian,
            moments: Moments { m1: 0.0, m2: 1.0, m3: 0.0, m4: 3.0 },
            subgaussian_delta: Some(0.25),
        }
    }

    /// Symmetric +-1 law.
    pub fn bernoulli() -> Self {
        Self::atoms(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)]).expect("symmetric Bernoulli law is well formed")
    }

    pub fn atoms(atoms: Vec<Atom>) -> Result<Self, EnsembleError> {
        check_atoms(&atoms)?;
        let kind = LawKind::Atoms(atoms);
        let moments = entry_law_moments_of(&kind);
        Ok(EntryLaw { kind, moments, subgaussian_delta: Some(1.0) })
    }

    pub fn gaussian_mix(atoms: Vec<Atom>, gamma: f64) -> Result<Self, EnsembleError> {
        check_atoms(&atoms)?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(EnsembleError::BadGamma(gamma));
        }
        let kind = LawKind::GaussianMix { atoms, gamma };
        let moments = entry_law_moments_of(&kind);
        Ok(EntryLaw { kind, moments, subgaussian_delta: Some(0.25) })
    }

    /// Overrides the recorded subgaussian constant; `None` means unknown.
    pub fn with_subgaussian_delta(mut self, delta: Option<f64>) -> Self {
        self.subgaussian_delta = delta;
        self
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn moments(&self) -> Moments {
        self.moments
    }

    pub fn subgaussian_delta(&self) -> Option<f64> {
        self.subgaussian_delta
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, LawKind::Gaussian)
    }

    /// Fails unless the law is centred with unit variance.
    pub fn check_standardized(&self) -> Result<(), EnsembleError> {
        if self.moments.m1.abs() > MOMENT_TOL {
            return Err(EnsembleError::NotCentred(self.moments.m1));
        }
        if (self.moments.m2 - 1.0).abs() > MOMENT_TOL {
            return Err(EnsembleError::NotStandardized(self.moments.m2));
        }
        Ok(())
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            LawKind::Gaussian => rng.sample(StandardNormal),
            LawKind::Atoms(atoms) => sample_atom(atoms, rng),
            LawKind::GaussianMix { atoms, gamma } => {
                let xi = sample_atom(atoms, rng);
                let g: f64 = rng.sample(StandardNormal);
                libm::sqrt(1.0 - gamma) * xi + libm::sqrt(*gamma) * g
            }
        }
    }
}

fn check_atoms(atoms: &[Atom]) -> Result<(), EnsembleError> {
    if atoms.is_empty() {
        return Err(EnsembleError::NoAtoms);
    }
    let mut sum = 0.0;
    for a in atoms {
        if !a.value.is_finite() {
            return Err(EnsembleError::NonFiniteAtom(a.value));
        }
        if !(a.weight >= 0.0) {
            return Err(EnsembleError::BadWeights { sum: f64::NAN });
        }
        sum += a.weight;
    }
    if (sum - 1.0).abs() > MOMENT_TOL {
        return Err(EnsembleError::BadWeights { sum });
    }
    Ok(())
}

fn sample_atom<R: Rng + ?Sized>(atoms: &[Atom], rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for a in atoms {
        acc += a.weight;
        if u < acc {
            return a.value;
        }
    }
    // weights may sum to 1 - 1e-12
    atoms.iter().rev().find(|a| a.weight > 0.0).map_or(atoms[0].value, |a| a.value)
}

fn atom_moments(atoms: &[Atom]) -> Moments {
    let mut m = [0.0f64; 4];
    for a in atoms {
        let mut p = a.weight;
        for slot in m.iter_mut() {
            p *= a.value;
            *slot += p;
        }
    }
    Moments { m1: m[0], m2: m[1], m3: m[2], m4: m[3] }
}

fn entry_law_moments_of(kind: &LawKind) -> Moments {
    match kind {
        LawKind::Gaussian => Moments { m1: 0.0, m2: 1.0, m3: 0.0, m4: 3.0 },
        LawKind::Atoms(atoms) => atom_moments(atoms),
        LawKind::GaussianMix { atoms, gamma } => {
            let xi = atom_moments(atoms);
            let a2 = 1.0 - gamma;
            let a = libm::sqrt(a2);
            let b2 = *gamma;
            // binomial expansion with E G = E G^3 = 0, E G^2 = 1, E G^4 = 3
            Moments {
                m1: a * xi.m1,
                m2: a2 * xi.m2 + b2,
                m3: a2 * a * xi.m3 + 3.0 * a * b2 * xi.m1,
                m4: a2 * a2 * xi.m4 + 6.0 * a2 * b2 * xi.m2 + 3.0 * b2 * b2,
            }
        }
    }
}

/// Exact moments of `law` (weighted power sums, binomial expansion for mixes).
pub fn entry_law_moments(law: &EntryLaw) -> Moments {
    entry_law_moments_of(&law.kind)
}

/// Symmetry class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symmetry {
    /// Real symmetric, beta = 1.
    Real,
    /// Complex Hermitian, beta = 2.
    Complex,
}

impl Symmetry {
    pub fn beta(self) -> f64 {
        match self {
            Symmetry::Real => 1.0,
            Symmetry::Complex => 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub symmetry: Symmetry,
    pub law: EntryLaw,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn new(symmetry: Symmetry, law: EntryLaw, n: usize) -> Self {
        EnsembleSpec { symmetry, law, n }
    }

    pub fn goe(n: usize) -> Self {
        Self::new(Symmetry::Real, EntryLaw::gaussian(), n)
    }

    pub fn gue(n: usize) -> Self {
        Self::new(Symmetry::Complex, EntryLaw::gaussian(), n)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.n == 0 {
            return Err(EnsembleError::EmptyDimension);
        }
        self.law.check_standardized()
    }

    /// Same symmetry and dimension, Gaussian entries.
    pub fn gaussian_counterpart(&self) -> Self {
        Self::new(self.symmetry, EntryLaw::gaussian(), self.n)
    }
}

/// Row-major `n x n` storage of a self-adjoint matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Entries {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample {
    pub n: usize,
    pub entries: Entries,
    /// Seed the entries were drawn from, when they were drawn.
    pub seed: Option<u64>,
    /// Ensemble the entries were drawn from, when they were drawn.
    pub spec: Option<EnsembleSpec>,
}

impl MatrixSample {
    /// Wraps an explicit real symmetric matrix. The upper triangle is mirrored.
    pub fn from_real(n: usize, mut entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n, "entry count must be n*n");
        for i in 0..n {
            for j in i + 1..n {
                entries[j * n + i] = entries[i * n + j];
            }
        }
        MatrixSample { n, entries: Entries::Real(entries), seed: None, spec: None }
    }

    /// Wraps an explicit Hermitian matrix. The upper triangle is mirrored and
    /// the diagonal made real.
    pub fn from_complex(n: usize, mut entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), n * n, "entry count must be n*n");
        for i in 0..n {
            entries[i * n + i].im = 0.0;
            for j in i + 1..n {
                entries[j * n + i] = entries[i * n + j].conj();
            }
        }
        MatrixSample { n, entries: Entries::Complex(entries), seed: None, spec: None }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self.entries {
            Entries::Real(_) => Symmetry::Real,
            Entries::Complex(_) => Symmetry::Complex,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            Entries::Real(a) => Complex64::new(a[i * self.n + j], 0.0),
            Entries::Complex(a) => a[i * self.n + j],
        }
    }

    /// Exact check: every entry equals the conjugate of its mirror.
    pub fn is_self_adjoint(&self) -> bool {
        let n = self.n;
        match &self.entries {
            Entries::Real(a) => (0..n).all(|i| (i..n).all(|j| a[i * n + j] == a[j * n + i])),
            Entries::Complex(a) => (0..n).all(|i| (i..n).all(|j| a[i * n + j] == a[j * n + i].conj())),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.entry(i, i).re).sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        let s: f64 = match &self.entries {
            Entries::Real(a) => a.iter().map(|x| x * x).sum(),
            Entries::Complex(a) => a.iter().map(|x| x.norm_sqr()).sum(),
        };
        libm::sqrt(s)
    }
}

/// Draws one matrix of the ensemble.
///
/// Row `i` reads stream `i` of the generator keyed by `seed`, consuming the
/// entries `j >= i` in order (real then imaginary part for complex
/// off-diagonal entries), so the result does not depend on evaluation order.
pub fn sample_wigner(spec: &EnsembleSpec, seed: u64) -> Result<MatrixSample, EnsembleError> {
    spec.validate()?;
    let n = spec.n;
    let nf = n as f64;
    let law = &spec.law;
    let entries = match spec.symmetry {
        Symmetry::Real => {
            let diag = libm::sqrt(2.0 / nf);
            let off = libm::sqrt(1.0 / nf);
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                let mut r = rng::stream(seed, i as u64);
                a[i * n + i] = diag * law.sample(&mut r);
                for j in i + 1..n {
                    let v = off * law.sample(&mut r);
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            Entries::Real(a)
        }
        Symmetry::Complex => {
            let diag = libm::sqrt(1.0 / nf);
            let off = libm::sqrt(0.5 / nf);
            let mut a = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                let mut r = rng::stream(seed, i as u64);
                a[i * n + i] = Complex64::new(diag * law.sample(&mut r), 0.0);
                for j in i + 1..n {
                    let x = law.sample(&mut r);
                    let y = law.sample(&mut r);
                    let v = Complex64::new(off * x, off * y);
                    a[i * n + j] = v;
                    a[j * n + i] = v.conj();
                }
            }
            Entries::Complex(a)
        }
    };
    Ok(MatrixSample { n, entries, seed: Some(seed), spec: Some(spec.clone()) })
}

/// Tridiagonal matrix with the same eigenvalue law as the Gaussian ensemble of
/// `symmetry` and dimension `n` (Householder reduction of a GOE/GUE matrix).
///
/// Diagonal entries are `N(0, 2/(beta N))`, the `k`-th off-diagonal entry is
/// `chi_{beta (n-1-k)} / sqrt(beta N)`. Only the spectrum agrees with
/// [`sample_wigner`]; the individual draws are unrelated.
pub fn sample_gaussian_tridiagonal(symmetry: Symmetry, n: usize, seed: u64) -> Result<Tridiagonal, EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::EmptyDimension);
    }
    let beta = symmetry.beta();
    let nf = n as f64;
    let mut r = rng::stream(seed, TRIDIAGONAL_STREAM);
    let sd = libm::sqrt(2.0 / (beta * nf));
    let diag = (0..n).map(|_| sd * r.sample::<f64, _>(StandardNormal)).collect();
    let scale = 1.0 / libm::sqrt(beta * nf);
    let off = (1..n)
        .map(|k| {
            let dof = beta * (n - k) as f64;
            let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
            scale * libm::sqrt(r.sample(chi2))
        })
        .collect();
    Ok(Tridiagonal { diag, off })
}

/// Stream index reserved for [`sample_gaussian_tridiagonal`].
const TRIDIAGONAL_STREAM: u64 = u64::MAX;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_and_bernoulli_moments() {
        assert_eq!(entry_law_moments(&EntryLaw::gaussian()).as_array(), [0.0, 1.0, 0.0, 3.0]);
        assert_eq!(entry_law_moments(&EntryLaw::bernoulli()).as_array(), [0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn mix_fourth_moment() {
        let law = EntryLaw::gaussian_mix(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)], 0.1).unwrap();
        let m = entry_law_moments(&law);
        // 0.81 * 1 + 6 * 0.9 * 0.1 + 3 * 0.01
        assert!((m.m4 - 1.38).abs() < 1e-12, "m4 = {}", m.m4);
        assert!((m.m2 - 1.0).abs() < 1e-15);
        assert!(m.m1.abs() < 1e-15 && m.m3.abs() < 1e-15);
    }

    #[test]
    fn mix_fourth_moment_matches_sampling() {
        let law = EntryLaw::gaussian_mix(vec![Atom::new(-1.0, 0.5), Atom::new(1.0, 0.5)], 0.1).unwrap();
        let mut r = rng::stream(2024, 0);
        let n = 2_000_000;
        let (mut s4, mut s8) = (0.0, 0.0);
        for _ in 0..n {
            let x = law.sample(&mut r);
            let x4 = x * x * x * x;
            s4 += x4;
            s8 += x4 * x4;
        }
        let mean = s4 / n as f64;
        let se = libm::sqrt((s8 / n as f64 - mean * mean) / n as f64);
        assert!((mean - 1.38).abs() < 4.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(matches!(
            EntryLaw::atoms(vec![Atom::new(1.0, 0.4), Atom::new(-1.0, 0.4)]),
            Err(EnsembleError::BadWeights { .. })
        ));
        let shifted = EntryLaw::atoms(vec![Atom::new(0.0, 0.5), Atom::new(2.0, 0.5)]).unwrap();
        let spec = EnsembleSpec::new(Symmetry::Real, shifted, 4);
        assert!(matches!(sample_wigner(&spec, 1), Err(EnsembleError::NotCentred(_))));
        let wide = EntryLaw::atoms(vec![Atom::new(-2.0, 0.5), Atom::new(2.0, 0.5)]).unwrap();
        let spec = EnsembleSpec::new(Symmetry::Real, wide, 4);
        assert!(matches!(sample_wigner(&spec, 1), Err(EnsembleError::NotStandardized(_))));
        assert_eq!(sample_wigner(&EnsembleSpec::goe(0), 1), Err(EnsembleError::EmptyDimension));
    }

    #[test]
    fn bernoulli_entries_take_two_values() {
        let spec = EnsembleSpec::new(Symmetry::Real, EntryLaw::bernoulli(), 4);
        let m = sample_wigner(&spec, 11).unwrap();
        assert!(m.is_self_adjoint());
        for i in 0..4 {
            for j in 0..4 {
                let v = m.entry(i, j).re;
                if i == j {
                    assert!((v.abs() - libm::sqrt(0.5)).abs() < 1e-15);
                } else {
                    assert!(v == 0.5 || v == -0.5, "entry {v}");
                }
            }
        }
    }

    #[test]
    fn one_by_one_goe_is_scaled_normal() {
        let m = sample_wigner(&EnsembleSpec::goe(1), 99).unwrap();
        let mut r = rng::stream(99, 0);
        let x: f64 = r.sample(StandardNormal);
        assert_eq!(m.entry(0, 0).re, libm::sqrt(2.0) * x);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = EnsembleSpec::gue(17);
        let a = sample_wigner(&spec, 5).unwrap();
        let b = sample_wigner(&spec, 5).unwrap();
        let c = sample_wigner(&spec, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.entries, c.entries);
        assert!(a.is_self_adjoint());
    }
}
