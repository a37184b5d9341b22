//! Reduced results of a suite.

use serde::{Deserialize, Deserializer, Serialize};
use wignerlab_core::stats::{self, StatsError};

/// `(edges, counts)`; `edges` has one more entry than `counts`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub criterion: String,
}

/// Moments, normality test and histogram of one per-replica statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    #[serde(deserialize_with = "nan_or_f64")]
    pub mean: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub mean_se: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub variance: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub variance_se: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub skewness: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub skewness_se: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub excess_kurtosis: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub excess_kurtosis_se: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub median: f64,
    #[serde(deserialize_with = "nan_or_f64")]
    pub median_se: f64,
    /// Kolmogorov-Smirnov distance to the standard normal law; absent below
    /// the minimum sample size of the test.
    pub ks_distance: Option<f64>,
    pub ks_pvalue: Option<f64>,
    pub histogram: HistogramData,
    pub verdict: Verdict,
}

impl StatSummary {
    /// Summary of `values` with an empty verdict; fewer than four values give
    /// zero standard errors and moments beyond the mean.
    pub fn of(values: &[f64], bins: usize) -> Result<Self, StatsError> {
        let n = values.len();
        let (mean, mean_se, variance, variance_se, skewness, skewness_se, kurt, kurt_se) = if n >= 4 {
            let d = stats::describe(values)?;
            (d.mean, d.se_mean, d.variance, d.se_variance, d.skewness, d.se_skewness, d.excess_kurtosis, d.se_kurtosis)
        } else if n > 0 {
            let v = if n > 1 { stats::variance(values) } else { 0.0 };
            (stats::mean(values), 0.0, v, 0.0, 0.0, 0.0, 0.0, 0.0)
        } else {
            (f64::NAN, 0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0)
        };
        let (ks_distance, ks_pvalue) = match stats::ks_normal(values) {
            Ok(r) => (Some(r.statistic), Some(r.p_value)),
            Err(StatsError::TooFewSamples { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        let (median, median_se) = if n > 0 {
            (stats::median(values), if n > 1 { stats::median_standard_error(values) } else { 0.0 })
        } else {
            (f64::NAN, 0.0)
        };
        let h = stats::histogram(values, bins);
        Ok(StatSummary {
            n,
            mean,
            mean_se,
            variance: variance.max(0.0),
            variance_se,
            skewness,
            skewness_se,
            excess_kurtosis: kurt,
            excess_kurtosis_se: kurt_se,
            median,
            median_se,
            ks_distance,
            ks_pvalue,
            histogram: HistogramData { edges: h.edges, counts: h.counts },
            verdict: Verdict { pass: true, criterion: String::new() },
        })
    }
}

/// One pass/fail comparison of an observed value with its bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nan_or_f64")]
    pub observed: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, observed: f64, band: [f64; 2]) -> Self {
        Check {
            name: name.into(),
            observed,
            bound: format!("in ({}, {})", band[0], band[1]),
            pass: observed > band[0] && observed < band[1],
        }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, bound: format!("<= {bound}"), pass: observed <= bound }
    }

    pub fn below(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, bound: format!("< {bound}"), pass: observed < bound }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, bound: format!(">= {bound}"), pass: observed >= bound }
    }

    pub fn above(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, bound: format!("> {bound}"), pass: observed > bound }
    }

    pub fn flag(name: impl Into<String>, pass: bool, bound: impl Into<String>) -> Self {
        Check { name: name.into(), observed: if pass { 1.0 } else { 0.0 }, bound: bound.into(), pass }
    }
}

/// One row of the per-replica table.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub replica: usize,
    pub seed: u64,
    pub statistic: String,
    pub value: f64,
}

/// A named summary of one per-replica statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSummary {
    pub label: String,
    #[serde(flatten)]
    pub summary: StatSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub statistic: String,
    pub replicas: usize,
    pub master_seed: u64,
    pub excluded: usize,
    pub summaries: Vec<NamedSummary>,
    /// Extra scalars (fitted slopes, correlation entries, frequencies).
    #[serde(deserialize_with = "nan_or_f64_pairs")]
    pub scalars: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl SuiteResult {
    pub fn new(name: &str, statistic: &str, replicas: usize, master_seed: u64) -> Self {
        SuiteResult {
            name: name.into(),
            statistic: statistic.into(),
            replicas,
            master_seed,
            excluded: 0,
            summaries: Vec::new(),
            scalars: Vec::new(),
            checks: Vec::new(),
            verdict: Verdict { pass: false, criterion: String::new() },
            records: Vec::new(),
        }
    }

    pub fn summary(&self, label: &str) -> Option<&StatSummary> {
        self.summaries.iter().find(|s| s.label == label).map(|s| &s.summary)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Adds a summary whose verdict is the conjunction of `checks`, which are
    /// also appended to the suite's own checks.
    pub fn push_summary(&mut self, label: impl Into<String>, mut summary: StatSummary, checks: Vec<Check>) {
        summary.verdict = verdict_of(&checks);
        self.checks.extend(checks);
        self.summaries.push(NamedSummary { label: label.into(), summary });
    }

    /// Sets the overall verdict from all checks.
    pub fn finish(&mut self) {
        self.verdict = verdict_of(&self.checks);
    }
}

fn verdict_of(checks: &[Check]) -> Verdict {
    let criterion = checks.iter().map(|c| format!("{} {}", c.name, c.bound)).collect::<Vec<_>>().join("; ");
    Verdict { pass: checks.iter().all(|c| c.pass), criterion }
}

// JSON has no NaN; serde_json writes it as null.
fn nan_or_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nan_or_f64_pairs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, f64)>, D::Error> {
    let raw = Vec::<(String, Option<f64>)>::deserialize(d)?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}
