use wignerlab::config::{RunConfig, Sampler};
use wignerlab::experiments::{replica_seed, Runner};
use wignerlab::summary::SuiteResult;
use wignerlab_core::spectral::{v_wig, TestFunction};

fn run(text: &str) -> Vec<SuiteResult> {
    let cfg = RunConfig::parse(text).unwrap();
    Runner::new(2).unwrap().run_all(&cfg).unwrap()
}

fn suite(body: &str) -> String {
    format!("master_seed = 3\n\n[[suite]]\nname = \"s\"\n{body}\n")
}

#[test]
fn identical_laws_have_zero_gap() {
    let r = &run(&suite(
        r#"statistic = "expectation-gap"
replicas = 20
sizes = [16, 32]
compare = { kind = "gaussian" }
ensemble = { symmetry = "real", n = 32, law = { kind = "gaussian" } }"#,
    ))[0];
    assert_eq!(r.scalar("gap[N=16]"), Some(0.0));
    assert_eq!(r.scalar("gap[N=32]"), Some(0.0));
}

#[test]
fn identical_starts_give_zero_coupled_difference() {
    // gaussian Y paths come from the same spectra as the X paths
    let r = &run(&suite(
        r#"statistic = "advection"
replicas = 3
energies = [0.0, 0.5]
ensemble = { symmetry = "real", n = 16, law = { kind = "gaussian" } }"#,
    ))[0];
    for label in ["D[E=0]", "D[E=0.5]"] {
        let s = r.summary(label).unwrap();
        assert_eq!((s.mean, s.variance), (0.0, 0.0), "{label}");
    }
    let d: Vec<f64> = r.records.iter().filter(|x| x.statistic.starts_with("residual")).map(|x| x.value).collect();
    assert!(d.iter().all(|&v| v == 0.0));
}

#[test]
fn coupled_difference_is_small_for_bernoulli_start() {
    let r = &run(&suite(
        r#"statistic = "advection"
replicas = 4
ensemble = { symmetry = "real", n = 24, law = { kind = "bernoulli" } }"#,
    ))[0];
    let s = r.summary("D[E=0]").unwrap();
    assert!(s.mean > 0.0 && s.median < 0.5, "{s:?}");
    assert_eq!(r.excluded, 0);
}

#[test]
fn counts_are_integers_and_match_the_identity() {
    let r = &run(&suite(
        r#"statistic = "imlogdet"
replicas = 30
energies = [-1.0, 0.0, 1.5]
ensemble = { symmetry = "complex", n = 40, law = { kind = "gaussian" } }"#,
    ))[0];
    assert!(r.check("counting_identity").unwrap().pass);
    let counts: Vec<f64> = r.records.iter().filter(|x| x.statistic.starts_with("count[")).map(|x| x.value).collect();
    assert_eq!(counts.len(), 90);
    assert!(counts.iter().all(|c| c.fract() == 0.0 && (0.0..=40.0).contains(c)));
}

#[test]
fn correlation_matrix_is_psd_and_targets_follow_theta() {
    let r = &run(&suite(
        r#"statistic = "gustavsson"
replicas = 60
indices = [20, 26, 50]
theta = [0.5, 1.0]
ensemble = { symmetry = "real", n = 64, law = { kind = "gaussian" } }"#,
    ))[0];
    assert!(r.check("corr_min_eigenvalue").unwrap().pass);
    assert_eq!(r.scalar("corr[k=20,k=26].target"), Some(0.5));
    assert_eq!(r.scalar("corr[k=26,k=50].target"), Some(0.0));
    assert_eq!(r.scalar("corr[k=20,k=50].target"), Some(0.0));
}

#[test]
fn variance_scan_reports_macroscopic_reference() {
    let r = &run(&suite(
        r#"statistic = "variance-scan"
replicas = 50
epsilons = [0.0, 0.3]
ensemble = { symmetry = "real", n = 32, law = { kind = "gaussian" } }"#,
    ))[0];
    let reference = v_wig(&TestFunction::log_modulus(1.0), 0.0).unwrap();
    assert_eq!(r.scalar("v_wig_tau1"), Some(reference));
    assert!(r.scalar("c_hat").unwrap() > 0.0);
    assert!(r.check("v_wig_rel_error").is_some());
}

#[test]
fn spectra_extend_as_prefixes() {
    let cfg = RunConfig::parse(&suite(
        r#"statistic = "logdet"
replicas = 5
ensemble = { symmetry = "real", n = 12, law = { kind = "bernoulli" } }"#,
    ))
    .unwrap();
    let ens = &cfg.suites[0].ensemble;
    let runner = Runner::new(1).unwrap();
    let short = runner.spectra(ens, 9, 4);
    let long = runner.spectra(ens, 9, 9);
    assert_eq!(long.len(), 9);
    for (a, b) in short.iter().zip(long.iter()) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.spectrum.as_ref().unwrap().values(), b.spectrum.as_ref().unwrap().values());
    }
    runner.clear_cache();
    let fresh = Runner::new(3).unwrap().spectra(ens, 9, 9);
    for (a, b) in fresh.iter().zip(long.iter()) {
        assert_eq!(a.spectrum.as_ref().unwrap().values(), b.spectrum.as_ref().unwrap().values());
    }
}

#[test]
fn seeds_ignore_the_sampler() {
    let cfg = RunConfig::parse(&suite(
        r#"statistic = "logdet"
replicas = 5
ensemble = { symmetry = "complex", n = 12, law = { kind = "gaussian" } }"#,
    ))
    .unwrap();
    let dense = cfg.suites[0].ensemble.clone();
    let tri = wignerlab::config::EnsembleConfig { sampler: Sampler::Tridiagonal, ..dense.clone() };
    assert_eq!(replica_seed(1, &dense, 4), replica_seed(1, &tri, 4));
    assert_ne!(replica_seed(1, &dense, 4), replica_seed(1, &dense.with_n(13), 4));
}

#[test]
fn regularized_scan_is_centered() {
    let r = &run(&suite(
        r#"statistic = "logdet-regularized"
replicas = 200
sizes = [64, 128]
ensemble = { symmetry = "real", n = 128, law = { kind = "gaussian" }, sampler = "tridiagonal" }"#,
    ))[0];
    for n in [64, 128] {
        let s = r.summary(&format!("g[N={n}]")).unwrap();
        assert!(s.mean.abs() < 4.0 * s.mean_se + 0.05, "N={n}: {s:?}");
    }
}
