use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cgnc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgnc")).args(args).output().unwrap()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// One feature with 200 rows per class at ±a around 0 and 2. The unbiased
/// variance is then exactly 1, so the log-odds are `2x − 2`.
fn one_d_csv(dir: &Path) -> PathBuf {
    let path = dir.join("one_d.csv");
    let a = (199.0f64 / 200.0).sqrt();
    let mut text = String::from("x,class\n");
    for k in 0..200 {
        let offset = if k % 2 == 0 { a } else { -a };
        text += &format!("{:e},0\n{:e},1\n", offset, 2.0 + offset);
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn fit_one_d(dir: &Path) -> String {
    let csv = one_d_csv(dir);
    let model = dir.join("model.json");
    let out = cgnc(&["fit", "--data", csv.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    model.to_string_lossy().into_owned()
}

#[test]
fn fit_prints_structure_summary() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = cgnc(&[
        "fit",
        "--data",
        &data("banknote_like.csv"),
        "--structure",
        "tan",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("4 nodes, 3 edges"), "{stdout}");
    assert!(model.exists());
}

#[test]
fn missing_file_exits_with_two() {
    let out = cgnc(&["fit", "--data", "/nonexistent.csv", "--out", "/tmp/never.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn explain_one_d_is_robust() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_one_d(dir.path());
    for backend in ["local", "milp"] {
        let out = cgnc(&[
            "explain", "--model", &model, "--factual", "-0.5", "--gamma", "0.05", "--backend", backend,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["outcome"], "robust", "{backend}");
        assert!(report["iterations"].as_u64().unwrap() <= 3);
        let x = report["counterfactual"][0].as_f64().unwrap();
        assert!((x - 1.05).abs() < 1e-4, "{backend}: {x}");
    }
}

#[test]
fn positive_factual_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_one_d(dir.path());
    let out = cgnc(&["explain", "--model", &model, "--factual", "3.0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dump_lp_writes_subproblems() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_one_d(dir.path());
    let dump = dir.path().join("lp");
    std::fs::create_dir(&dump).unwrap();
    let out = cgnc(&[
        "explain", "--model", &model, "--factual", "-0.5", "--dump-lp", dump.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = std::fs::read_dir(&dump)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n == "mp_001.lp"), "{names:?}");
    assert!(names.iter().any(|n| n == "ap_001.lp"), "{names:?}");
    let text = std::fs::read_to_string(dump.join("mp_001.lp")).unwrap();
    assert!(text.contains("Minimize") && text.contains("End"));
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = cgnc(&[
            "experiment",
            "--data",
            &data("banknote_like.csv"),
            "--backend",
            "local",
            "--runs",
            "3",
            "--seed",
            "11",
            "--jobs",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("results.jsonl")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 6);
    for f in ["summary.json", "summary.txt", "scatter.csv"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn check_reports_one_d_constants() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_one_d(dir.path());
    let out = cgnc(&["check", "--model", &model, "--radius", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["lipschitz"].as_f64().unwrap() - 8.0).abs() < 1e-9);
    assert!((report["iteration_bound"].as_f64().unwrap() - 24000.0).abs() < 1e-5);
    assert!(report["gradient_max_rel_error"].as_f64().unwrap() < 1e-5);
}
