use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_specobs");

const BOTTOM: &str = r#"
seed = 11
trials = 20
search_trials = 2000

[system]
kind = "square"
n_max_eigenvalue = 40
gamma = [{ side = "bottom", alpha = 0.0, beta = "pi" }]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("SPECOBS_THREADS", "2").output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn coercivity_scan_reports_two_over_pi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BOTTOM);
    let out = run(&["coercivity-scan", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["scenario"], "coercivity_scan");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    for key in ["kappa1", "kappa2", "c0", "c0_prime", "theta0", "theta1_l2", "theta1_linf", "theta2"] {
        assert!(report["constants"][key].is_f64(), "{key}");
    }
    let table = &report["tables"][0];
    assert_eq!(table["columns"], serde_json::json!(["N", "size", "mu_N", "N_mu_N"]));
    let min = table["rows"].as_array().unwrap().iter().map(|r| r[3].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    assert!((min - 2.0 / std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn failed_verdict_exits_with_two() {
    let out = run(&["verify-cutoff"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sandwich = report["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == "cutoff_sandwich").unwrap();
    assert_eq!(sandwich["pass"], false);
    assert_eq!(report["tables"][0]["rows"].as_array().unwrap().len(), 4001);
}

#[test]
fn config_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let parse = write(dir.path(), "parse.toml", "[system\nkind = 1");
    let schema = write(
        dir.path(),
        "schema.toml",
        "[system]\nkind = \"custom\"\neigenvalues = [1.0, 2.0]\ngram = [[1.0, 0.5], [0.4, 1.0]]\n",
    );
    let invariant = write(dir.path(), "inv.toml", &BOTTOM.replace("n_max_eigenvalue = 40", "n_max_eigenvalue = 1"));
    let missing = dir.path().join("nope.toml").display().to_string();
    let codes: Vec<Option<i32>> = [parse, schema.clone(), invariant, missing]
        .iter()
        .map(|p| run(&["coercivity-scan", "--config", p]).status.code())
        .collect();
    assert_eq!(codes, vec![Some(3), Some(5), Some(6), Some(3)]);
    let err = String::from_utf8_lossy(&run(&["coercivity-scan", "--config", &schema]).stderr).to_string();
    assert!(err.contains("(0,1)") && err.contains("line 4"), "{err}");
}

#[test]
fn non_psd_custom_system_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "neg.toml",
        "[system]\nkind = \"custom\"\neigenvalues = [1.0, 2.0]\ngram = [[1.0, 2.0], [2.0, 1.0]]\n",
    );
    assert_eq!(run(&["coercivity-scan", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BOTTOM);
    let out = run(&["admissibility", "--config", &cfg, "--trials", "7", "--T", "2.5", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 3);
    let rows = report["tables"].as_array().unwrap().iter().find(|t| t["name"] == "admissibility").unwrap()["rows"]
        .as_array()
        .unwrap()
        .len();
    assert_eq!(rows, 7);
    assert_eq!(run(&["admissibility", "--trials", "0"]).status.code(), Some(6));
}

#[test]
fn custom_system_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "custom.toml",
        r#"
trials = 10
search_trials = 500
epsilon_cluster = 0.4

[system]
kind = "custom"
eigenvalues = [1.0, 2.0, 2.0, 4.5, 7.0]
gram = [[1.0, 0.2, 0.0, 0.0, 0.1],
        [0.2, 0.8, 0.1, 0.0, 0.0],
        [0.0, 0.1, 0.6, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5, 0.0],
        [0.1, 0.0, 0.0, 0.0, 0.4]]
"#,
    );
    for scenario in ["coercivity-scan", "resolvent-scan", "weak-observability", "admissibility"] {
        let out = run(&[scenario, "--config", &cfg]);
        assert!(matches!(out.status.code(), Some(0) | Some(2)), "{scenario}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
    }
    assert_eq!(run(&["assumption-i", "--config", &cfg]).status.code(), Some(4));
}

#[test]
fn output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BOTTOM);
    for scenario in ["resolvent-scan", "weak-observability"] {
        let a = dir.path().join(format!("{scenario}-a"));
        let b = dir.path().join(format!("{scenario}-b"));
        for (out, threads) in [(&a, "1"), (&b, "4")] {
            let status = Command::new(BIN)
                .args([scenario, "--config", &cfg, "--format", "csv", "--out", out.to_str().unwrap()])
                .env("SPECOBS_THREADS", threads)
                .status()
                .unwrap();
            assert_eq!(status.code(), Some(0));
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.iter().any(|n| n == "verdicts.csv"));
        for name in names {
            assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
    }
    let j1 = run(&["resolvent-scan", "--config", &cfg]).stdout;
    let j2 = run(&["resolvent-scan", "--config", &cfg]).stdout;
    assert_eq!(j1, j2);
}

#[test]
fn csv_numbers_carry_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a1");
    let status = Command::new(BIN)
        .args(["assumption-i", "--format", "csv", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("clusters.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,size,mu_N,deviation"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "2");
    let mu: f64 = first[2].parse().unwrap();
    assert!((mu - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    assert!(first[2].split('e').next().unwrap().len() >= 17);
}

#[test]
fn bad_thread_cap_is_rejected() {
    let out = Command::new(BIN).arg("verify-cutoff").env("SPECOBS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}
