//! Verdict table and plot data for a finished run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, Normal};

use crate::output::{read_manifest, read_replicas, read_summary, OutputError, RunManifest};
use crate::summary::{StatSummary, SuiteResult};

pub const PLOTS: &str = "plots";

pub struct Report {
    pub manifest: RunManifest,
    pub table: String,
    pub files: Vec<PathBuf>,
}

/// One line per suite: `name PASS mean=.. var=..` from its first summary, or
/// `name FAIL` followed by one indented line per failed check.
pub fn render_table(suites: &[SuiteResult]) -> String {
    let mut out = String::new();
    for s in suites {
        let status = if s.verdict.pass { "PASS" } else { "FAIL" };
        let _ = write!(out, "{} {status}", s.name);
        if let Some(first) = s.summaries.first() {
            let _ = write!(out, " mean={:.4} var={:.4}", first.summary.mean, first.summary.variance);
            if let Some(ks) = first.summary.ks_distance {
                let _ = write!(out, " ks={ks:.4}");
            }
            let _ = write!(out, " [{}]", first.label);
        }
        out.push('\n');
        for c in s.checks.iter().filter(|c| !c.pass) {
            let _ = writeln!(out, "  {}: observed {} vs bound {}", c.name, c.observed, c.bound);
        }
    }
    out
}

/// File-name form of a statistic label.
fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// `lower,upper,count` rows.
pub fn histogram_csv(s: &StatSummary) -> String {
    let mut out = String::from("lower,upper,count\n");
    let h = &s.histogram;
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", h.edges[i], h.edges[i + 1], c);
    }
    out
}

/// `sample,normal` rows: the sorted values against standard normal
/// quantiles at `(i + 1/2) / n`.
pub fn qq_csv(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = sorted.len() as f64;
    let mut out = String::from("sample,normal\n");
    for (i, v) in sorted.iter().enumerate() {
        let _ = writeln!(out, "{v},{}", normal.inverse_cdf((i as f64 + 0.5) / n));
    }
    out
}

/// Reads `dir`, writes `dir/plots/*.hist.csv` and `*.qq.csv`, and returns the
/// rendered table.
pub fn report(dir: &Path) -> Result<Report, OutputError> {
    let manifest = read_manifest(dir)?;
    let summary = read_summary(dir)?;
    let plots = dir.join(PLOTS);
    fs::create_dir_all(&plots).map_err(|source| OutputError::Io { path: plots.clone(), source })?;
    let mut files = Vec::new();
    let mut put = |name: String, text: String| -> Result<(), OutputError> {
        let path = plots.join(name);
        fs::write(&path, text).map_err(|source| OutputError::Io { path: path.clone(), source })?;
        files.push(path);
        Ok(())
    };
    for s in &summary.suites {
        for named in &s.summaries {
            put(
                format!("{}.hist.csv", file_stem(&format!("{}/{}", s.name, named.label))),
                histogram_csv(&named.summary),
            )?;
        }
    }
    for (stat, values) in read_replicas(dir)? {
        put(format!("{}.qq.csv", file_stem(&stat)), qq_csv(&values))?;
    }
    Ok(Report { manifest, table: render_table(&summary.suites), files })
}
