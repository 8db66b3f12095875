use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../core/corpus/{name}.json"))
}

fn mqw(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqw"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mqw-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn corrupted_kernel_row_is_an_input_error() {
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(corpus("swap_markov")).unwrap()).unwrap();
    v["P"][0] = serde_json::json!([0.9, 0.3]);
    let path = scratch("bad_p.json");
    std::fs::write(&path, v.to_string()).unwrap();
    for sub in ["validate", "verify", "spectrum"] {
        let out = mqw(&[sub], &path);
        assert_eq!(out.status.code(), Some(2), "{sub}");
        assert!(out.stdout.is_empty(), "{sub} wrote output");
        assert!(String::from_utf8_lossy(&out.stderr).contains("P"));
    }
}

#[test]
fn deterministic_coin_is_an_expected_failure() {
    let out = mqw(&["verify"], &corpus("hadamard_det"));
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "assumption_s")
        .unwrap();
    assert_eq!(s["status"], "expected_failure");
    assert_eq!(v["summary"]["failed"], 0);
}

#[test]
fn spent_budget_skips_remaining_checks() {
    let out = mqw(&["verify", "--budget-seconds", "0"], &corpus("flip_q050"));
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let statuses: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["status"].as_str().unwrap())
        .collect();
    assert!(statuses.contains(&"skipped"));
    assert!(!statuses.contains(&"fail"));
}

#[test]
fn wrong_model_kind_is_an_input_error() {
    assert_eq!(
        mqw(&["permutation"], &corpus("swap_markov")).status.code(),
        Some(2)
    );
    assert_eq!(
        mqw(&["uncorrelated"], &corpus("flip_q050")).status.code(),
        Some(2)
    );
}

#[test]
fn csv_output_carries_its_manifest() {
    let path = scratch("rate.csv");
    let out = mqw(
        &[
            "deviations",
            "--mode",
            "moderate",
            "--x-grid=-0.5:0.5:3",
            "--out",
            path.to_str().unwrap(),
        ],
        &corpus("flip_q050"),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let first = text.lines().next().unwrap();
    let manifest: Value =
        serde_json::from_str(first.strip_prefix("# manifest: ").unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "deviations");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    let mid: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(mid.abs() < 1e-12);
}

#[test]
fn gapless_model_gets_no_diffusion() {
    let out = mqw(&["diffusion"], &corpus("identity_det"));
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["diffusion"].is_null());
}

#[test]
fn charfn_cross_check_passes() {
    let out = mqw(
        &["charfn", "--steps", "4", "--y", "0.7", "--check"],
        &corpus("three_coin"),
    );
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_array().unwrap().len(), 2);
}
