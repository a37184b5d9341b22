//! Experiment configuration files.
//!
//! A file holds a master seed and a list of `[[suite]]` tables. Parsing fills
//! in every default (including the tolerance bands of each statistic), so the
//! canonical text written back by [`RunConfig::to_canonical`] lists every value
//! a run depends on, and parsing it again gives the same configuration.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wignerlab_core::ensembles::{Atom, EnsembleSpec, EntryLaw, Symmetry};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("suite {index} ({name}): {field}: {message}")]
    Invalid { index: usize, name: String, field: String, message: String },
}

/// Quantity a suite estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Logdet,
    LogdetRegularized,
    Imlogdet,
    Gustavsson,
    Logcorr,
    Locallaw,
    Rigidity,
    Advection,
    ExpectationGap,
    VarianceScan,
    Counting,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Logdet => "logdet",
            Statistic::LogdetRegularized => "logdet-regularized",
            Statistic::Imlogdet => "imlogdet",
            Statistic::Gustavsson => "gustavsson",
            Statistic::Logcorr => "logcorr",
            Statistic::Locallaw => "locallaw",
            Statistic::Rigidity => "rigidity",
            Statistic::Advection => "advection",
            Statistic::ExpectationGap => "expectation-gap",
            Statistic::VarianceScan => "variance-scan",
            Statistic::Counting => "counting",
        }
    }

    /// Suites whose `sizes` list defaults to the ensemble dimension.
    fn scans_sizes(self) -> bool {
        matches!(self, Statistic::LogdetRegularized | Statistic::ExpectationGap | Statistic::VarianceScan)
    }
}

/// How eigenvalues of Gaussian ensembles are produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Sample the full matrix and diagonalize it.
    #[default]
    Dense,
    /// Gaussian ensembles only: the tridiagonal matrix model with the same
    /// eigenvalue law, diagonalized in O(N^2).
    Tridiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryConfig {
    Real,
    Complex,
}

impl From<SymmetryConfig> for Symmetry {
    fn from(s: SymmetryConfig) -> Self {
        match s {
            SymmetryConfig::Real => Symmetry::Real,
            SymmetryConfig::Complex => Symmetry::Complex,
        }
    }
}

/// Entry law; atoms are `[value, weight]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    Gaussian,
    Bernoulli,
    Atoms { atoms: Vec<[f64; 2]> },
    GaussianMix { atoms: Vec<[f64; 2]>, gamma: f64 },
}

impl LawConfig {
    pub fn to_law(&self) -> Result<EntryLaw, String> {
        let atoms = |a: &[[f64; 2]]| a.iter().map(|p| Atom::new(p[0], p[1])).collect::<Vec<_>>();
        let law = match self {
            LawConfig::Gaussian => EntryLaw::gaussian(),
            LawConfig::Bernoulli => EntryLaw::bernoulli(),
            LawConfig::Atoms { atoms: a } => EntryLaw::atoms(atoms(a)).map_err(|e| e.to_string())?,
            LawConfig::GaussianMix { atoms: a, gamma } => {
                EntryLaw::gaussian_mix(atoms(a), *gamma).map_err(|e| e.to_string())?
            }
        };
        law.check_standardized().map_err(|e| e.to_string())?;
        Ok(law)
    }

    /// Stable text used to key random streams and caches.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("law config serializes")
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, LawConfig::Gaussian)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub symmetry: SymmetryConfig,
    pub n: usize,
    pub law: LawConfig,
    #[serde(default)]
    pub sampler: Sampler,
}

impl EnsembleConfig {
    pub fn spec(&self) -> Result<EnsembleSpec, String> {
        Ok(EnsembleSpec::new(self.symmetry.into(), self.law.to_law()?, self.n))
    }

    pub fn beta(&self) -> f64 {
        Symmetry::from(self.symmetry).beta()
    }

    pub fn with_n(&self, n: usize) -> Self {
        EnsembleConfig { n, ..self.clone() }
    }

    pub fn with_law(&self, law: LawConfig) -> Self {
        let sampler = if law.is_gaussian() { self.sampler } else { Sampler::Dense };
        EnsembleConfig { law, sampler, ..self.clone() }
    }
}

/// Pass/fail bands. Absent entries are filled from the defaults of the
/// suite's statistic when the file is parsed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance_max: Option<f64>,
    /// Two-sample comparison against the `compare` law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_pvalue_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_max: Option<f64>,
    /// Median bound in units of `sqrt(log N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_log_factor: Option<f64>,
    /// Allowed increase between consecutive sizes, in standard errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_tol: Option<f64>,
    /// Smallest eigenvalue allowed for an empirical correlation matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coincident_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation_max: Option<f64>,
    /// Exponent `c` in the rigidity window `N^{-2/3 + c}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigidity_c: Option<f64>,
    /// Exponent `a` in the local-law bound `N^a exp((log log N)^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_law_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_n_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_fraction_min: Option<f64>,
    /// `C0` in `phi = exp(C0 (log log N)^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_c_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vwig_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_fraction_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_ratio: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_fraction_max: Option<f64>,
}

macro_rules! fill {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Tolerances {
    /// Default bands of `statistic`.
    pub fn defaults_for(statistic: Statistic) -> Self {
        let clt = Tolerances {
            mean: Some([-0.15, 0.15]),
            variance: Some([0.7, 1.3]),
            ks_distance_max: Some(0.06),
            ..Default::default()
        };
        let mut t = match statistic {
            Statistic::Logdet => Tolerances { ks_pvalue_min: Some(0.01), ..clt },
            Statistic::Imlogdet => clt,
            Statistic::Gustavsson => Tolerances { correlation_tol: Some(0.15), psd_tol: Some(0.05), ..clt },
            Statistic::LogdetRegularized => {
                Tolerances { median_max: Some(0.1), trend_se: Some(2.0), ..Default::default() }
            }
            Statistic::Logcorr => {
                Tolerances { correlation_tol: Some(0.15), coincident_min: Some(1.0 - 1e-12), ..Default::default() }
            }
            Statistic::Locallaw => {
                Tolerances { local_law_exponent: Some(0.1), min_n_eta: Some(10.0), ..Default::default() }
            }
            Statistic::Rigidity => {
                Tolerances { violation_max: Some(0.01), rigidity_c: Some(0.1), ..Default::default() }
            }
            Statistic::Advection => Tolerances {
                median_max: Some(0.5),
                median_log_factor: Some(0.2),
                residual_constant: Some(10.0),
                residual_fraction_min: Some(0.95),
                phi_c0: Some(1.0),
                ..Default::default()
            },
            Statistic::ExpectationGap => {
                Tolerances { gap_max: Some(2.0), slope_t_max: Some(2.0), ..Default::default() }
            }
            Statistic::VarianceScan => {
                Tolerances { variance_c_max: Some(5.0), vwig_rel_tol: Some(0.3), ..Default::default() }
            }
            Statistic::Counting => {
                Tolerances { empty_fraction_min: Some(0.95), count_ratio: Some([0.5, 2.0]), ..Default::default() }
            }
        };
        t.excluded_fraction_max = Some(0.001);
        t
    }

    fn fill_from(&mut self, d: &Tolerances) {
        fill!(self, d; mean, variance, ks_distance_max, ks_pvalue_min, median_max, median_log_factor,
            trend_se, correlation_tol, psd_tol, coincident_min, violation_max, rigidity_c,
            local_law_exponent, min_n_eta, gap_max, slope_t_max, residual_constant,
            residual_fraction_min, phi_c0, variance_c_max, vwig_rel_tol, empty_fraction_min,
            count_ratio, excluded_fraction_max);
    }
}

fn default_epsilon() -> f64 {
    0.2
}
fn default_nu() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    1e-3
}
fn default_kappa() -> f64 {
    0.1
}
fn default_bins() -> usize {
    40
}
fn default_micro_exponent() -> f64 {
    1.5
}
fn default_bulk_width() -> f64 {
    10.0
}

/// One suite of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub statistic: Statistic,
    pub replicas: usize,
    /// Overrides the file's master seed for this suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub indices: Vec<usize>,
    /// Dimensions of an N-scan.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Exponents `c` of energy separations `N^{-c}` (log-correlation suite).
    #[serde(default)]
    pub separations: Vec<f64>,
    /// Exponents `a` of spectral scales `eta = N^{-a}` (local-law suite).
    #[serde(default)]
    pub eta_exponents: Vec<f64>,
    /// Tail levels `K` of the local-law suite.
    #[serde(default)]
    pub tail_levels: Vec<f64>,
    /// Exponents `epsilon` of the variance scan.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Second ensemble law (same symmetry and size) for comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<LawConfig>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Counting suite: the empty-interval check uses width `N^{-micro_exponent}`.
    #[serde(default = "default_micro_exponent")]
    pub micro_exponent: f64,
    /// Counting suite: the density check uses width `bulk_width / N`.
    #[serde(default = "default_bulk_width")]
    pub bulk_width: f64,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    #[serde(rename = "suite")]
    pub suites: Vec<ExperimentConfig>,
}

impl RunConfig {
    /// Parses, fills defaults and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Fills every default so that the canonical text is self-contained.
    pub fn resolve(&mut self) {
        for s in &mut self.suites {
            s.resolve();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.suites.is_empty() {
            return Err(ConfigError::Parse("no [[suite]] tables".into()));
        }
        for (i, s) in self.suites.iter().enumerate() {
            s.validate().map_err(|(field, message)| ConfigError::Invalid {
                index: i,
                name: s.name.clone(),
                field,
                message,
            })?;
            if self.suites[..i].iter().any(|o| o.name == s.name) {
                return Err(ConfigError::Invalid {
                    index: i,
                    name: s.name.clone(),
                    field: "name".into(),
                    message: "duplicate suite name".into(),
                });
            }
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_canonical().as_bytes()))
    }

    pub fn suite_seed(&self, suite: &ExperimentConfig) -> u64 {
        suite.master_seed.unwrap_or(self.master_seed)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    fn resolve(&mut self) {
        let d = Tolerances::defaults_for(self.statistic);
        self.tolerances.fill_from(&d);
        if self.energies.is_empty() {
            self.energies.push(0.0);
        }
        if self.sizes.is_empty() && self.statistic.scans_sizes() {
            self.sizes.push(self.ensemble.n);
        }
        if self.statistic == Statistic::Locallaw {
            if self.eta_exponents.is_empty() {
                self.eta_exponents = vec![0.5];
            }
            if self.tail_levels.is_empty() {
                self.tail_levels = vec![1.0, 2.0, 4.0, 8.0, 16.0];
            }
        }
        if self.statistic == Statistic::VarianceScan && self.epsilons.is_empty() {
            self.epsilons = vec![self.epsilon];
        }
        if self.statistic == Statistic::ExpectationGap && self.compare.is_none() {
            self.compare = Some(LawConfig::Gaussian);
        }
    }

    /// Checks the invariants; errors name the offending field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |f: &str, m: String| Err((f.to_string(), m));
        if self.name.is_empty() || self.name.contains(|c: char| c.is_whitespace() || c == '/' || c == ',') {
            return bad("name", "must be non-empty without spaces, commas or slashes".into());
        }
        if self.replicas < 1 {
            return bad("replicas", "must be at least 1".into());
        }
        if self.ensemble.n < 1 {
            return bad("ensemble.n", "must be at least 1".into());
        }
        if let Err(e) = self.ensemble.law.to_law() {
            return bad("ensemble.law", e);
        }
        if self.ensemble.sampler == Sampler::Tridiagonal && !self.ensemble.law.is_gaussian() {
            return bad("ensemble.sampler", "the tridiagonal sampler needs a gaussian law".into());
        }
        if let Some(law) = &self.compare {
            if let Err(e) = law.to_law() {
                return bad("compare", e);
            }
        }
        for (i, &t) in self.theta.iter().enumerate() {
            if !(t > 0.0 && t <= 1.0) {
                return bad(&format!("theta[{i}]"), format!("{t} violates the invariant theta in (0, 1]"));
            }
        }
        if self.indices.windows(2).any(|w| w[1] <= w[0]) {
            return bad("indices", "must be strictly increasing".into());
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return bad("energies", "must be finite".into());
        }
        if self.sizes.iter().any(|&n| n < 1) {
            return bad("sizes", "must be at least 1".into());
        }
        if !(self.epsilon >= 0.0) || self.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return bad("epsilon", "must be nonnegative".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return bad("nu", "must lie in [0, 1]".into());
        }
        if !(self.kappa > 0.0 && self.kappa < 2.0) {
            return bad("kappa", "must lie in (0, 2)".into());
        }
        if !(self.micro_exponent > 0.0) || !(self.bulk_width > 0.0) {
            return bad("micro_exponent", "interval parameters must be positive".into());
        }
        if self.bins < 1 {
            return bad("bins", "must be at least 1".into());
        }
        let n = self.ensemble.n;
        match self.statistic {
            Statistic::Gustavsson => {
                if self.indices.is_empty() {
                    return bad("indices", "gustavsson needs at least one index".into());
                }
                if self.theta.len() + 1 != self.indices.len() {
                    return bad("theta", "needs one exponent per consecutive index pair".into());
                }
                for &k in &self.indices {
                    let a = k as f64 / n as f64;
                    if !(a > 0.05 && a < 0.95) {
                        return bad("indices", format!("k = {k} has k/N = {a:.3} outside (0.05, 0.95)"));
                    }
                }
            }
            Statistic::Imlogdet | Statistic::Logcorr => {
                let edge = 2.0 - self.kappa;
                if let Some(e) = self.energies.iter().find(|e| e.abs() > edge) {
                    return bad("energies", format!("{e} outside the bulk [-{edge}, {edge}]"));
                }
                if self.statistic == Statistic::Logcorr && self.separations.iter().any(|c| !(*c > 0.0)) {
                    return bad("separations", "exponents must be positive".into());
                }
            }
            Statistic::Locallaw => {
                let min_n_eta = self.tolerances.min_n_eta.unwrap_or(0.0);
                for &a in &self.eta_exponents {
                    let n_eta = (n as f64).powf(1.0 - a);
                    if !(n_eta >= min_n_eta) {
                        return bad(
                            "eta_exponents",
                            format!("eta = N^-{a} gives N eta = {n_eta:.3} below min_n_eta = {min_n_eta}"),
                        );
                    }
                }
                if self.tail_levels.iter().any(|k| !(*k > 0.0)) {
                    return bad("tail_levels", "must be positive".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
master_seed = 7

[[suite]]
name = "logdet_clt"
statistic = "logdet"
replicas = 10
ensemble = { symmetry = "real", n = 32, law = { kind = "gaussian" } }
"#;

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let s = &c.suites[0];
        assert_eq!(s.tolerances.mean, Some([-0.15, 0.15]));
        assert_eq!(s.energies, vec![0.0]);
        assert_eq!(s.ensemble.sampler, Sampler::Dense);
    }

    #[test]
    fn canonical_round_trip() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let text = c.to_canonical();
        let d = RunConfig::parse(&text).unwrap();
        assert_eq!(c, d);
        assert_eq!(text, d.to_canonical());
        assert_eq!(c.hash(), d.hash());
    }

    #[test]
    fn theta_out_of_range_is_named() {
        let text = MINIMAL.replace("replicas = 10", "replicas = 10\ntheta = [1.5]");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("theta[0]") && err.contains("(0, 1]"), "{err}");
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = MINIMAL.replace("replicas = 10", "replicas = 10\nreplica = 3");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("line") && err.contains("replica"), "{err}");
    }

    #[test]
    fn tridiagonal_needs_gaussian() {
        let text = MINIMAL
            .replace(r#"law = { kind = "gaussian" }"#, r#"law = { kind = "bernoulli" }, sampler = "tridiagonal""#);
        assert!(RunConfig::parse(&text).is_err());
    }
}
