//! Files written by a run: `config.toml` (canonical config), `replicas.csv`,
//! `summary.json` and `manifest.json`. Only the manifest carries timestamps;
//! the other three are byte-identical across reruns with the same config.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::summary::SuiteResult;

pub const MANIFEST: &str = "manifest.json";
pub const REPLICAS: &str = "replicas.csv";
pub const SUMMARY: &str = "summary.json";
pub const CONFIG: &str = "config.toml";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl OutputError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| OutputError::Io { path: path.to_path_buf(), source }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        OutputError::Format { path: path.to_path_buf(), message: message.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteVerdict {
    pub name: String,
    pub statistic: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub config: String,
    pub replicas: String,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical config text.
    pub config_hash: String,
    pub master_seed: u64,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub pass: bool,
    pub suites: Vec<SuiteVerdict>,
    pub files: OutputPaths,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, results: &[SuiteResult], threads: usize, started: String, finished: String) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            threads,
            started,
            finished,
            pass: results.iter().all(|r| r.verdict.pass),
            suites: results
                .iter()
                .map(|r| SuiteVerdict { name: r.name.clone(), statistic: r.statistic.clone(), pass: r.verdict.pass })
                .collect(),
            files: OutputPaths { config: CONFIG.into(), replicas: REPLICAS.into(), summary: SUMMARY.into() },
        }
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub master_seed: u64,
    pub suites: Vec<SuiteResult>,
}

/// `replica,seed,statistic,value` rows with `statistic` prefixed by the suite
/// name. Values use the shortest round-trip decimal form.
pub fn replicas_csv(results: &[SuiteResult]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["replica", "seed", "statistic", "value"])?;
    for r in results {
        for rec in &r.records {
            w.write_record([
                rec.replica.to_string(),
                rec.seed.to_string(),
                format!("{}/{}", r.name, rec.statistic),
                rec.value.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn summary_json(cfg: &RunConfig, results: &[SuiteResult]) -> Vec<u8> {
    let s = RunSummary { config_hash: cfg.hash(), master_seed: cfg.master_seed, suites: results.to_vec() };
    let mut out = serde_json::to_vec_pretty(&s).expect("summary serializes");
    out.push(b'\n');
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    fs::write(path, bytes).map_err(OutputError::io(path))
}

/// Writes all run files into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    results: &[SuiteResult],
    manifest: &RunManifest,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(OutputError::io(dir))?;
    write(&dir.join(CONFIG), cfg.to_canonical().as_bytes())?;
    let csv_path = dir.join(REPLICAS);
    let csv = replicas_csv(results).map_err(|e| OutputError::format(&csv_path, e))?;
    write(&csv_path, &csv)?;
    write(&dir.join(SUMMARY), &summary_json(cfg, results))?;
    let mut m = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    m.push(b'\n');
    write(&dir.join(MANIFEST), &m)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, OutputError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(OutputError::io(&path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::format(&path, e))
}

pub fn read_summary(dir: &Path) -> Result<RunSummary, OutputError> {
    let path = dir.join(SUMMARY);
    let text = fs::read_to_string(&path).map_err(OutputError::io(&path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::format(&path, e))
}

/// `(statistic, values)` in file order, grouped by statistic.
pub fn read_replicas(dir: &Path) -> Result<Vec<(String, Vec<f64>)>, OutputError> {
    let path = dir.join(REPLICAS);
    let mut r = csv::Reader::from_path(&path).map_err(|e| OutputError::format(&path, e))?;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in r.records() {
        let row = row.map_err(|e| OutputError::format(&path, e))?;
        let (stat, value) = (&row[2], &row[3]);
        let v: f64 = value.parse().map_err(|_| OutputError::format(&path, format!("bad value {value:?}")))?;
        match index.get(stat) {
            Some(&i) => groups[i].1.push(v),
            None => {
                index.insert(stat.to_string(), groups.len());
                groups.push((stat.to_string(), vec![v]));
            }
        }
    }
    Ok(groups)
}
