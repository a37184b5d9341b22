//! `wignerlab run <config> --out <dir> [--threads n] [--seed s]` and
//! `wignerlab report <dir>`. Exit codes: 0 pass, 1 error, 2 statistical fail.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::experiments::{resolve_threads, Runner};
use crate::output::{write_run, RunManifest};
use crate::report::report;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wignerlab", version, about = "Monte Carlo checks of Wigner-matrix spectral statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs every suite of a config file and writes the results.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "wignerlab-out")]
        out: PathBuf,
        /// Worker threads; falls back to WIGNERLAB_THREADS, then the core count.
        #[arg(long)]
        threads: Option<usize>,
        /// Replaces the master seed of the file and of every suite.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Prints the verdict table of a run directory and writes plot data.
    Report { dir: PathBuf },
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs `cfg` and writes its files into `out`; returns the exit code.
pub fn run(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> i32 {
    let threads = resolve_threads(threads);
    let runner = match Runner::new(threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let started = now();
    let mut results = Vec::with_capacity(cfg.suites.len());
    for suite in &cfg.suites {
        eprintln!("running {} ({}, {} replicas)", suite.name, suite.statistic, suite.replicas);
        match runner.run_suite(suite, cfg.suite_seed(suite)) {
            Ok(r) => {
                eprintln!("  {}", if r.verdict.pass { "PASS" } else { "FAIL" });
                results.push(r);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_ERROR;
            }
        }
    }
    let manifest = RunManifest::new(cfg, &results, threads, started, now());
    if let Err(e) = write_run(out, cfg, &results, &manifest) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    print!("{}", crate::report::render_table(&results));
    if manifest.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
        }
    };
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return EXIT_ERROR;
                }
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
                cfg.suites.iter_mut().for_each(|suite| suite.master_seed = None);
            }
            run(&cfg, &out, threads)
        }
        Command::Report { dir } => match report(&dir) {
            Ok(r) => {
                print!("{}", r.table);
                eprintln!("wrote {} plot files to {}", r.files.len(), dir.join(crate::report::PLOTS).display());
                if r.manifest.pass {
                    EXIT_PASS
                } else {
                    EXIT_FAIL
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
    }
}
