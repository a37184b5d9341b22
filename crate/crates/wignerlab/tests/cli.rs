use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
master_seed = 7

[[suite]]
name = "logdet_clt"
statistic = "logdet"
replicas = 10
ensemble = { symmetry = "real", n = 32, law = { kind = "gaussian" } }
"#;

fn wignerlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wignerlab")).args(args).env_remove("WIGNERLAB_THREADS").output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    wignerlab(&args)
}

fn passing_config(dir: &Path) -> std::path::PathBuf {
    // wide bands: ten replicas only exercise the plumbing
    let text = MINIMAL.replace(
        "replicas = 10\n",
        "replicas = 10\ntolerances = { mean = [-10.0, 10.0], variance = [0.0, 100.0], ks_distance_max = 1.0 }\n",
    );
    let path = dir.join("minimal.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn smoke_run_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = passing_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "replicas.csv", "summary.json", "config.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("replicas.csv")).unwrap();
    assert!(csv.starts_with("replica,seed,statistic,value\n"));
    assert!(!csv.contains('\r'));
    assert!(csv.lines().any(|l| l.contains(",logdet_clt/exact,")));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("logdet_clt PASS mean="), "{stdout}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = passing_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &["--threads", "3"]).status.code(), Some(0));
    for f in ["replicas.csv", "summary.json", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = passing_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &["--seed", "8"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("replicas.csv")).unwrap(), fs::read(b.join("replicas.csv")).unwrap());
    let manifest = fs::read_to_string(b.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 8"));
}

#[test]
fn invalid_theta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
master_seed = 1

[[suite]]
name = "g"
statistic = "gustavsson"
replicas = 10
indices = [10, 20]
theta = [1.5]
ensemble = { symmetry = "real", n = 32, law = { kind = "gaussian" } }
"#;
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("theta in (0, 1]"), "{err}");
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, MINIMAL.replace("replicas = 10", "replicas = ten")).unwrap();
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn failing_band_exits_two_and_reports_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fail.toml");
    let text = MINIMAL.replace("replicas = 10\n", "replicas = 10\ntolerances = { variance = [50.0, 60.0] }\n");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(2));
    let o = wignerlab(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("logdet_clt FAIL"), "{table}");
    assert!(table.contains("exact.variance: observed"), "{table}");
    assert!(table.contains("in (50, 60)"), "{table}");
}

#[test]
fn report_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = passing_config(dir.path());
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(0));
    let o = wignerlab(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let qq = fs::read_to_string(out.join("plots/logdet_clt_exact.qq.csv")).unwrap();
    let first: Vec<f64> = qq.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(first.len(), 10);
    assert!(first.windows(2).all(|w| w[0] <= w[1]));
    let csv = fs::read_to_string(out.join("replicas.csv")).unwrap();
    let mut exact: Vec<f64> = csv
        .lines()
        .filter(|l| l.contains(",logdet_clt/exact,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    exact.sort_by(f64::total_cmp);
    assert_eq!(first, exact);
    assert!(out.join("plots/logdet_clt_exact.hist.csv").is_file());
}

#[test]
fn report_without_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = wignerlab(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}
