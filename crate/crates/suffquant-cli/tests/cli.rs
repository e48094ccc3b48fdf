//! End-to-end tests of the installed binary: exit codes, report shape,
//! oracle values on the bundled fixtures, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_suffquant"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("binary exits normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

/// The report text up to the varying timing field; everything that must
/// be byte-identical across reruns.
fn stable_prefix(out: &Output) -> String {
    let text = String::from_utf8(out.stdout.clone()).expect("reports are UTF-8");
    let cut = text.rfind("\"timing_ms\"").expect("reports carry a timing field");
    text[..cut].to_string()
}

#[test]
fn every_bundled_fixture_validates() {
    for name in [
        "quaternary_copy.json",
        "centralized_parity.json",
        "ci_planted.json",
        "hci_planted.json",
    ] {
        let out = run(&["validate", fixture(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report = stdout_json(&out);
        assert_eq!(report["schema_version"], "1", "{name}");
        assert_eq!(report["invocation"]["seed"], 0, "{name}");
        assert_eq!(report["results"]["diagnostics"]["pass"], true, "{name}");
    }
}

#[test]
fn search_reproduces_the_exact_design_oracles() {
    let model = fixture("quaternary_copy.json");
    let model = model.to_str().unwrap();

    let raw = run(&["search", "--levels", "2,2", "--domain", "raw", model]);
    assert_eq!(code(&raw), 0, "{}", String::from_utf8_lossy(&raw.stderr));
    assert_eq!(stdout_json(&raw)["results"]["min_risk"], 0.0);

    let reduced = run(&["search", "--levels", "2,2", "--domain", "stat:T1,T2", model]);
    assert_eq!(code(&reduced), 0, "{}", String::from_utf8_lossy(&reduced.stderr));
    assert_eq!(stdout_json(&reduced)["results"]["min_risk"], 0.5);
}

#[test]
fn failed_checks_exit_one_and_still_write_the_report() {
    let dir = tempfile::tempdir().expect("temp dir");
    let report_path = dir.path().join("report.json");
    let out = bin()
        .args(["suff", "--stat", "T2"])
        .arg(fixture("quaternary_copy.json"))
        .arg("--out")
        .arg(&report_path)
        .output()
        .expect("binary spawns");
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).expect("report written"))
            .expect("report parses");
    assert_eq!(report["results"]["check"]["holds"], false);
    // Collapsing one of two identical sensors discards exactly its copy
    // of the two-bit parameter.
    assert_eq!(report["results"]["information_gap"]["gap_bits"], 2.0);
}

#[test]
fn usage_errors_exit_two_and_write_nothing() {
    let dir = tempfile::tempdir().expect("temp dir");
    let report_path = dir.path().join("report.json");
    let no_report = |out: &Output, what: &str| {
        assert_eq!(code(out), 2, "{what}");
        assert!(!out.stderr.is_empty(), "{what}: silent failure");
        assert!(!report_path.exists(), "{what}: report written");
        assert!(
            std::fs::read_dir(dir.path()).unwrap().next().is_none(),
            "{what}: stray file left behind"
        );
    };

    let out = bin()
        .args(["search", "--frobnicate", "--out"])
        .arg(&report_path)
        .arg(fixture("quaternary_copy.json"))
        .output()
        .expect("binary spawns");
    no_report(&out, "unknown flag");

    let out = bin()
        .args(["validate", "does/not/exist.json", "--out"])
        .arg(&report_path)
        .output()
        .expect("binary spawns");
    no_report(&out, "missing model file");

    let out = bin()
        .args(["suff", "--stat", "T1", "--stat", "T2", "--stat", "T1", "--out"])
        .arg(&report_path)
        .arg(fixture("quaternary_copy.json"))
        .output()
        .expect("binary spawns");
    no_report(&out, "three statistics");

    let out = bin()
        .args(["search", "--levels", "2,2", "--domain", "stat:T1,NOPE", "--out"])
        .arg(&report_path)
        .arg(fixture("quaternary_copy.json"))
        .output()
        .expect("binary spawns");
    no_report(&out, "unknown statistic");
}

#[test]
fn reruns_are_byte_identical_up_to_timing() {
    let args = ["suite", "--id", "one-sided-copy", "--trials", "5", "--seed", "3"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stable_prefix(&first), stable_prefix(&second));
}

#[test]
fn minimal_groups_proportional_symbols() {
    let out = run(&["minimal", "--side", "1", fixture("ci_planted.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = &stdout_json(&out)["results"];
    assert_eq!(results["class_count"], 3);
    let map = &results["statistic"]["map"];
    assert_eq!(map["a"], map["b"], "proportional likelihood columns share a class");
    assert_ne!(map["c"], map["a"]);
    assert_ne!(map["c"], map["d"]);
}

#[test]
fn hidden_chain_fixture_passes_every_structural_check() {
    let model = fixture("hci_planted.json");
    let model = model.to_str().unwrap();

    let hci = run(&["hci", model]);
    assert_eq!(code(&hci), 0, "{}", String::from_utf8_lossy(&hci.stderr));
    assert_eq!(stdout_json(&hci)["results"]["verdict"], "valid");

    let split = run(&["factorize", "--stat", "T1", model]);
    assert_eq!(code(&split), 0, "{}", String::from_utf8_lossy(&split.stderr));
    let results = &stdout_json(&split)["results"];
    assert_eq!(results["check"]["holds"], true);
    assert!(results["factors"].is_object(), "a passing check recovers factors");

    let ci = run(&["ci", "--a", "x1", "--b", "x2", "--given", "w", model]);
    assert_eq!(code(&ci), 0, "{}", String::from_utf8_lossy(&ci.stderr));

    let marginal = run(&["ci", "--a", "x1", "--b", "x2", model]);
    assert_eq!(code(&marginal), 1, "sensors are only conditionally independent");
}

#[test]
fn scenario_writes_report_and_csv_atomically() {
    let dir = tempfile::tempdir().expect("temp dir");
    let report_path = dir.path().join("report.json");
    let csv_path = dir.path().join("rows.csv");
    let out = bin()
        .args(["scenario", "sensing", "--samples", "30000", "--bins", "16"])
        .args(["--levels", "2", "--restarts", "4", "--csv"])
        .arg(&csv_path)
        .arg("--out")
        .arg(&report_path)
        .env("SUFFQUANT_THREADS", "2")
        .output()
        .expect("binary spawns");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).expect("report written"))
            .expect("report parses");
    let results = &report["results"];
    let envelope_risk = results["sufficient"]["risk"].as_f64().unwrap();
    let closed_form = results["closed_form"]["error_probability"].as_f64().unwrap();
    assert!((envelope_risk - closed_form).abs() < 0.03);

    let csv = std::fs::read_to_string(&csv_path).expect("csv written");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("statistic_1,level_1,estimate"));
    assert_eq!(lines.count(), 30000);
    assert!(!Path::new(&format!("{}.tmp", csv_path.display())).exists());
}

#[test]
fn worker_count_env_is_validated() {
    let out = bin()
        .args(["validate", fixture("ci_planted.json").to_str().unwrap()])
        .env("SUFFQUANT_THREADS", "banana")
        .output()
        .expect("binary spawns");
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("SUFFQUANT_THREADS"));
}
