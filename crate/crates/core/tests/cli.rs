use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use l1pca::data::{read_dense, write_dense};
use l1pca::linalg::Mat;

fn l1pca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1pca")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generated(dir: &Path, sigma: &str, seed: &str) {
    let out = l1pca(
        &["generate", "--n", "100", "--d", "50", "--K", "5", "--sigma", sigma, "--seed", seed, "--out", "inst"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_writes_instance_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path(), "0.5", "7");
    for f in ["X.bin", "U.bin", "Z.bin", "summary.json"] {
        assert!(dir.path().join("inst").join(f).exists(), "{f}");
    }
    let first = std::fs::read(dir.path().join("inst/X.bin")).unwrap();
    generated(dir.path(), "0.5", "7");
    assert_eq!(std::fs::read(dir.path().join("inst/X.bin")).unwrap(), first);
    let x = read_dense(dir.path().join("inst/X.bin")).unwrap();
    assert_eq!(x.shape(), (50, 100));

    generated(dir.path(), "0", "7");
    let x = read_dense(dir.path().join("inst/X.bin")).unwrap();
    let z = read_dense(dir.path().join("inst/Z.bin")).unwrap();
    assert_eq!(x, z);
}

#[test]
fn generate_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&l1pca(&["generate", "--n", "abc"], dir.path())), 2);
    let out = l1pca(&["generate", "--n", "3", "--d", "2", "--K", "5", "--sigma", "1", "--out", "o"], dir.path());
    assert_eq!(code(&out), 2);
    assert_eq!(code(&l1pca(&["generate", "--d", "2"], dir.path())), 2);
}

#[test]
fn solve_exports_trace_and_result() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path(), "0.5", "1");
    let out = l1pca(
        &["solve", "--input", "inst/X.bin", "--K", "5", "--method", "pame", "--alpha", "1e-5", "--beta", "1e3",
          "--gamma", "1.0", "--seed", "2", "--out", "run"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["converged"], true);
    assert!(report["tev"].as_f64().unwrap() <= 1.0 + 1e-12);
    assert!(report["criticality"]["h_residual"].as_f64().is_some());
    let trace = std::fs::read_to_string(dir.path().join("run/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), report["iterations"].as_u64().unwrap() as usize + 2);
    assert!(dir.path().join("run/result.json").exists());
    assert_eq!(read_dense(dir.path().join("run/Q.bin")).unwrap().shape(), (50, 5));
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path(), "0.5", "1");
    let out = l1pca(&["solve", "--input", "inst/X.bin", "--K", "5", "--theorem-mode", "--gamma", "0.9"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("(iii)"));

    let out = l1pca(&["solve", "--input", "inst/X.bin", "--K", "5", "--max-iter", "2"], dir.path());
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["converged"], false);

    let out = l1pca(&["solve", "--input", "inst/X.bin", "--K", "5", "--method", "nope"], dir.path());
    assert_eq!(code(&out), 2);
    let out = l1pca(&["solve", "--input", "missing.bin", "--K", "5"], dir.path());
    assert_eq!(code(&out), 2);

    write_dense(dir.path().join("zero.bin"), &Mat::zeros(3, 4)).unwrap();
    let out = l1pca(&["solve", "--input", "zero.bin", "--K", "2"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["iterations"], 1);
}

#[test]
fn compare_shares_the_start_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path(), "0.5", "3");
    let all = l1pca(&["compare", "--input", "inst/X.bin", "--K", "5", "--methods", "all", "--seed", "4"], dir.path());
    assert_eq!(code(&all), 0);
    let text = String::from_utf8(all.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,iterations,objective_l1,tev,converged,error");
    assert_eq!(lines.len(), 7);
    let again = l1pca(&["compare", "--input", "inst/X.bin", "--K", "5", "--methods", "all", "--seed", "4"], dir.path());
    assert_eq!(all.stdout, again.stdout);

    let one = l1pca(&["compare", "--input", "inst/X.bin", "--K", "5", "--methods", "pame", "--seed", "4"], dir.path());
    let row: Vec<String> = String::from_utf8(one.stdout).unwrap().lines().nth(1).unwrap().split(',').map(String::from).collect();
    let solo = json(&l1pca(&["solve", "--input", "inst/X.bin", "--K", "5", "--seed", "4"], dir.path()));
    assert_eq!(row[1], solo["iterations"].to_string());
    assert_eq!(row[2].parse::<f64>().unwrap(), solo["objective_l1"].as_f64().unwrap());
}

#[test]
fn compare_records_failures_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_dense(dir.path().join("zero.bin"), &Mat::zeros(3, 4)).unwrap();
    let out = l1pca(&["compare", "--input", "zero.bin", "--K", "1", "--methods", "fpm,pam"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let fpm = text.lines().find(|l| l.starts_with("fpm")).unwrap();
    assert!(fpm.contains("degenerate"), "{fpm}");
    assert!(text.lines().any(|l| l.starts_with("pam,1,")));
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = l1pca(&["verify", "--suite", "sandwich", "--samples", "1000"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["pass"], true);

    let out = l1pca(&["verify", "--suite", "oracle", "--n", "3", "--K", "2", "--d", "4"], dir.path());
    assert_eq!(code(&out), 0);

    let out = l1pca(&["verify", "--suite", "critical-sets"], dir.path());
    assert_eq!(code(&out), 0);
    let min = json(&out)["reports"][0]["min_ratio"].as_f64().unwrap();
    assert!((min - 2.0).abs() < 1e-9);

    let out = l1pca(&["verify", "--suite", "error-bound", "--singular-values", "2,2"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("distinct singular values"));

    for suite in ["error-bound", "kl", "audit"] {
        let out = l1pca(&["verify", "--suite", suite, "--samples", "100"], dir.path());
        assert_eq!(code(&out), 0, "{suite}: {}", String::from_utf8_lossy(&out.stdout));
    }
    assert_eq!(code(&l1pca(&["verify", "--suite", "bogus"], dir.path())), 2);
}

#[test]
fn cluster_scores_labels() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.txt"), "1 1:3\n2 2:1\n").unwrap();
    let out = l1pca(&["cluster", "--input", "toy.txt", "--auto-K", "--beta", "1", "--max-iter", "5000"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["K"], 1);
    assert_eq!(report["accuracy"], 1.0);

    std::fs::write(dir.path().join("same.txt"), "4 1:1 2:2\n4 1:-1\n4 2:3\n").unwrap();
    let out = l1pca(&["cluster", "--input", "same.txt", "--K", "1", "--beta", "1", "--max-iter", "5000"], dir.path());
    assert_eq!(json(&out)["accuracy"], 1.0);

    write_dense(dir.path().join("x.bin"), &Mat::identity(2)).unwrap();
    let out = l1pca(&["cluster", "--input", "x.bin", "--K", "1"], dir.path());
    assert_eq!(code(&out), 2);
    let out = l1pca(&["cluster", "--input", "toy.txt"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_supplies_settings_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path(), "0.5", "5");
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"input": "inst/X.bin", "K": 5, "method": "pam", "max_iter": 2}"#,
    )
    .unwrap();
    let out = l1pca(&["--config", "run.json", "solve"], dir.path());
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["method"], "pam");
    let out = l1pca(&["solve", "--config", "run.json", "--max-iter", "5000", "--method", "fpm"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["method"], "fpm");

    std::fs::write(dir.path().join("bad.json"), r#"{"inputt": "x"}"#).unwrap();
    let out = l1pca(&["--config", "bad.json", "solve"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("inputt"));
}
