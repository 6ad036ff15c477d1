use std::path::PathBuf;
use std::process::{Command, Output};

fn qtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtlab")).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("qtlab-cli-{}-{name}", std::process::id()))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exact_radius_moment_at_zero_is_one() {
    let o = qtlab(&["exact", "--formula", "radius-moment", "--kappa", "2", "--rho-minus", "0", "--rho-plus", "0", "--rho1", "0", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1.00000000"));
}

#[test]
fn exact_alpha0_and_json_report() {
    let out = tmp("alpha0.json");
    let o = qtlab(&["--output", out.to_str().unwrap(), "exact", "--formula", "alpha0", "--kappa", "2", "--rho-plus", "0", "--rho1", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"][0]["estimate"].as_f64(), Some(4.0));
    assert_eq!(v["command"], "exact");
    assert!(v["version"].is_string());
    assert!(v.get("wall_seconds").is_none());
    let _ = std::fs::remove_file(out);
}

#[test]
fn seiberg_violation_is_a_domain_error() {
    let o = qtlab(&["exact", "--formula", "h-bar", "--gamma", "1", "--beta1", "0.5", "--beta2", "1.5", "--beta3", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta3"));
}

#[test]
fn conflicting_couplings_are_rejected() {
    let o = qtlab(&["exact", "--formula", "alpha0", "--kappa", "2", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identity_suite_passes_and_writes_residual_csv() {
    let csv = tmp("residuals.csv");
    let t0 = std::time::Instant::now();
    let o = qtlab(&["--csv", csv.to_str().unwrap(), "verify-identities", "--grid-size", "5"]);
    assert!(t0.elapsed().as_secs() < 10);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("identity_name,grid_point,residual\n"));
    let worst = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-6, "worst residual {worst}");
    let _ = std::fs::remove_file(csv);
}

#[test]
fn perturbed_identity_suite_fails() {
    let o = qtlab(&["verify-identities", "--grid-size", "5", "--perturb", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn too_few_samples_is_a_quality_failure() {
    let o = qtlab(&["verify-radius", "--kappa", "2", "--alpha", "-1", "--n-samples", "10"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn wrong_expected_value_fails_verification() {
    let o = qtlab(&[
        "verify-gmc", "--gamma", "1", "--beta1", "0.5", "--beta2", "0.5", "--beta3", "2", "--n-grid", "512", "--n-samples", "400",
        "--expect-override", "3.0",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let cfg = tmp("config.json");
    std::fs::write(&cfg, r#"{"gamma": 1.0, "n_samples": 300, "seed": 5, "dt": 0.02}"#).unwrap();
    let out = tmp("surfaces.json");
    let o = qtlab(&["--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "verify-surfaces", "--seed", "9"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["n_samples"], 300);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["dt"], 0.02);
    let _ = std::fs::remove_file(cfg);
    let _ = std::fs::remove_file(out);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let run = |w: &str| {
        let out = tmp(&format!("det-{w}.json"));
        let o = qtlab(&[
            "--workers", w, "--output", out.to_str().unwrap(), "verify-gmc", "--gamma", "1", "--beta1", "0.3", "--beta2", "0.7", "--beta3",
            "2.5", "--n-grid", "256", "--n-samples", "300",
        ]);
        assert!(o.status.code().is_some());
        let b = std::fs::read(&out).unwrap();
        let _ = std::fs::remove_file(out);
        b
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn result_csv_for_campaigns() {
    let csv = tmp("results.csv");
    qtlab(&["--csv", csv.to_str().unwrap(), "verify-surfaces", "--gamma", "1", "--n-samples", "200"]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("name,estimate,stderr,n,ess,exact,z,pass\n"));
    let _ = std::fs::remove_file(csv);
}
