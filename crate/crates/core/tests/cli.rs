use std::path::Path;

use saa_conic::cli::output::{PATH_COLUMNS, PHI_COLUMNS, SWEEP_COLUMNS};
use saa_conic::cli::run;

fn call(args: &[&str]) -> i32 {
    run(std::iter::once("saa-conic").chain(args.iter().copied()))
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(String::from).collect()
}

#[test]
fn invalid_config_lists_every_problem_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"regression\"\nN_list = [32, 8]\nbogus = 1\n[gamma]\nexponent = 2.0\n",
    );
    assert_eq!(call(&["solve", "--config", &cfg]), 1);
    match saa_conic::cli::config::RunConfig::from_file(Path::new(&cfg)) {
        Err(saa_conic::Error::Config(errs)) => assert!(errs.len() >= 3, "{errs:?}"),
        other => panic!("expected configuration errors, got {other:?}"),
    }
}

#[test]
fn failed_gradient_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"semilinear\"\n[check_grad]\npoints = 2\ntol = 1e-300\n");
    assert_eq!(call(&["check-grad", "--config", &cfg]), 2);
    assert_eq!(call(&["check-grad", "--config", &cfg, "--problem", "kantorovich"]), 2);
}

#[test]
fn sweep_writes_versioned_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"regression\"\nN_list = [8, 16]\nseeds = [0, 1]\n[sweep]\nreference_n = 256\nvalidation_samples = 100\n",
    );
    let out = dir.path().join("out");
    assert_eq!(call(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    assert_eq!(header(&out.join("sweep.csv")), SWEEP_COLUMNS);
    let rows = std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 4);
    for f in ["opt_value_vs_N.svg", "multiplier_norm_vs_N.svg", "violation_vs_gamma.svg"] {
        assert!(std::fs::read_to_string(out.join(f)).unwrap().starts_with("<svg"));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["per_n"].as_array().unwrap().len(), 2);
    assert_eq!(summary["reference"]["N"], 256);
}

#[test]
fn json_format_and_oracle_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"kantorovich\"\nmethod = \"saa-oracle\"\nformat = \"json\"\nplots = false\nN_list = [16]\nseeds = [4]\n[sweep]\nreference_n = 0\n",
    );
    let out = dir.path().join("out");
    assert_eq!(call(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let rec = &v["records"][0];
    assert_eq!(rec["method"], "saa-oracle");
    assert!(rec["gamma"].is_null());
    assert!(rec["kkt"]["stationarity"].as_f64().unwrap() <= 1e-8);
    assert!(!out.join("opt_value_vs_N.svg").exists());
}

#[test]
fn solve_phi_and_certify_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"scalar\"\nN_list = [1]\n[gamma]\nladder = [1.0, 10.0, 100.0]\ntol = 1e-12\n\
         [phi]\nvalidation_samples = 8\nlevels = [0.5, 0.4]\n[certify]\ntrials = 20\nvalidation_samples = 100\n",
    );
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(call(&["solve", "--config", &cfg, "--out", o]), 0);
    assert_eq!(header(&out.join("path.csv")), PATH_COLUMNS);
    let solve: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["gamma"], 100.0);
    assert!((solve["u"][0].as_f64().unwrap() - 102.0 / 101.0).abs() <= 1e-9);

    assert_eq!(call(&["phi", "--config", &cfg, "--out", o]), 0);
    assert_eq!(header(&out.join("phi.csv")), PHI_COLUMNS);
    let text = std::fs::read_to_string(out.join("phi.csv")).unwrap();
    let phi: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(phi[0] <= 1e-3 && (phi[1] - 0.005).abs() <= 1e-4, "{phi:?}");

    assert_eq!(call(&["certify", "--config", &cfg, "--out", o]), 0);
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["passed"], true);
}

#[test]
fn gamma_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"scalar\"\nN_list = [16]\n");
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let code = call(&[
        "solve", "--config", &cfg, "--out", o, "--gamma-c", "2", "--gamma-exp", "0.5", "--gamma-stages", "3",
    ]);
    assert_eq!(code, 0);
    let solve: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["gamma"], 8.0);
    let stages = solve["stages"].as_array().unwrap();
    let gammas: Vec<f64> = stages.iter().map(|s| s["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas, [2.0, 4.0, 8.0]);
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"scalar\"\nN_list = [1]\nplots = false\n");
    let env_out = dir.path().join("from-env");
    std::env::set_var(saa_conic::cli::config::OUT_DIR_ENV, &env_out);
    assert_eq!(call(&["solve", "--config", &cfg]), 0);
    std::env::remove_var(saa_conic::cli::config::OUT_DIR_ENV);
    assert!(env_out.join("solve.json").exists());
}
