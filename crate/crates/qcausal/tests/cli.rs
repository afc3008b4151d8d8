//! Behavior of the command-line front end: exit codes, machine-readable
//! error categories and byte-stable outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qcausal")
}

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_positivity_of_shipped_models() {
    let out = run_ok(&["validate", path_str(&models_dir().join("front_door_quantum.toml"))]);
    assert!(out.contains("theory: quantum"));
    assert!(out.contains("positivity: positive"));
}

#[test]
fn validate_rejects_cyclic_wiring_with_machine_readable_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("cyclic.toml");
    std::fs::write(
        &bad,
        r#"
theory = "classical"

[systems]
B = 2

[[boxes]]
name = "f"
inputs = ["B"]
outputs = ["B"]
kind = "matrix"
data = [[0.5, 0.5], [0.5, 0.5]]

[[loci]]
name = "X"
system = "B"

[[wires]]
from = "X.leave"
to = "f.in[0]"

[[wires]]
from = "f.out[0]"
to = "X.arrive"
"#,
    )
    .unwrap();
    let out = run(&["validate", path_str(&bad)]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error[CycleDetected]"), "stderr: {stderr}");
}

#[test]
fn missing_files_surface_an_io_category() {
    let out = run(&["validate", "/nonexistent/model.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[Io]"));
}

#[test]
fn observe_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let model = models_dir().join("front_door_classical.toml");
    let t1 = dir.path().join("t1.toml");
    let t2 = dir.path().join("t2.toml");
    run_ok(&["observe", path_str(&model), "--out", path_str(&t1)]);
    run_ok(&["observe", path_str(&model), "--out", path_str(&t2)]);
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
}

#[test]
fn observe_accepts_a_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = models_dir().join("front_door_quantum.toml");
    let plan = dir.path().join("plan.toml");
    std::fs::write(
        &plan,
        r#"
[[plan]]
locus = "X"
choices = ["std"]

[[plan]]
locus = "Z"
choices = ["trivial", "std"]

[[plan]]
locus = "Y"
choices = ["trivial"]
"#,
    )
    .unwrap();
    let table = dir.path().join("table.toml");
    let out = run_ok(&[
        "observe",
        path_str(&model),
        "--plan",
        path_str(&plan),
        "--out",
        path_str(&table),
    ]);
    // 2 outcomes x (1 + 2) x 1
    assert!(out.contains("wrote 6 rows"), "stdout: {out}");
}

#[test]
fn identify_accepts_explicit_roles_for_table_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = models_dir().join("front_door_quantum.toml");
    let table = dir.path().join("table.toml");
    let ident = dir.path().join("ident.toml");
    let gt = dir.path().join("gt.toml");
    run_ok(&["observe", path_str(&model), "--out", path_str(&table)]);
    run_ok(&[
        "identify",
        path_str(&table),
        "--shape",
        "front-door",
        "--roles",
        "X=X,Z=Z,Y=Y",
        "--out",
        path_str(&ident),
    ]);
    run_ok(&[
        "ground-truth",
        path_str(&model),
        "--src",
        "X",
        "--tgt",
        "Y",
        "--out",
        path_str(&gt),
    ]);
    let printed = run_ok(&["compare", path_str(&ident), path_str(&gt)]);
    let dist: f64 = printed.trim().parse().unwrap();
    assert!(dist <= 1e-8, "distance {dist}");
}

#[test]
fn generated_single_intervention_models_identify_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.toml");
    run_ok(&[
        "gen-random-model",
        "--shape",
        "single-intervention",
        "--theory",
        "classical",
        "--dim",
        "3",
        "--seed",
        "5",
        "--out",
        path_str(&model),
    ]);
    let out = run_ok(&["validate", path_str(&model)]);
    assert!(out.contains("positivity: positive"));
    let ident = dir.path().join("ident.toml");
    let gt = dir.path().join("gt.toml");
    run_ok(&[
        "identify",
        path_str(&model),
        "--shape",
        "single-intervention",
        "--out",
        path_str(&ident),
    ]);
    run_ok(&[
        "ground-truth",
        path_str(&model),
        "--src",
        "X",
        "--tgt",
        "C",
        "--out",
        path_str(&gt),
    ]);
    let printed = run_ok(&["compare", path_str(&ident), path_str(&gt)]);
    let dist: f64 = printed.trim().parse().unwrap();
    assert!(dist <= 1e-10, "distance {dist}");
}

#[test]
fn generated_models_are_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    for out in [&a, &b] {
        run_ok(&[
            "gen-random-model",
            "--shape",
            "front-door",
            "--theory",
            "quantum",
            "--seed",
            "42",
            "--out",
            path_str(out),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn demo_counterexample_prints_residual_and_gap() {
    let out = run_ok(&["demo-counterexample", "--lambda", "0.5"]);
    let grab = |tag: &str| -> f64 {
        out.lines()
            .find(|l| l.starts_with(tag))
            .and_then(|l| l.split_whitespace().nth(2))
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| panic!("missing `{tag}` in output: {out}"))
    };
    let residual = grab("observational residual:");
    let gap = grab("interventional gap:");
    assert!(residual <= 1e-12, "residual {residual}");
    assert!(gap >= 0.2, "gap {gap}");
}

#[test]
fn demo_counterexample_rejects_out_of_range_lambda() {
    let out = run(&["demo-counterexample", "--lambda", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[BadLambda]"));
}

#[test]
fn ground_truth_reports_descendancy_violations() {
    let model = models_dir().join("front_door_quantum.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "ground-truth",
        path_str(&model),
        "--src",
        "Y",
        "--tgt",
        "X",
        "--out",
        path_str(&dir.path().join("c.toml")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[DescendancyViolation]"));
}
