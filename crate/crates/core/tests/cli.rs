use std::process::{Command, Output};

use serde_json::{json, Value};

fn eisdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eisdist"))
        .args(args)
        .env_remove("ENGINE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn global_orbit_count_at_level_three() {
    let doc = stdout_json(&eisdist(&["orbit", "global", "--v", "1,0", "--M", "1", "--N", "3"]));
    assert_eq!(doc["format"], 1);
    assert_eq!(doc["count"], 8);
    let doc = stdout_json(&eisdist(&["orbit", "oracle", "--v", "1,0", "--N", "3"]));
    assert_eq!(doc["count"], 8);
}

#[test]
fn parametrize_basis_function_weight_two() {
    let doc = stdout_json(&eisdist(&["eis", "parametrize", "--phi", "basis:1,0@3", "--k", "2"]));
    assert_eq!(doc["format"], 1);
    assert_eq!(doc["kind"], "class");
    assert_eq!(doc["level"], 3);
    assert_eq!(doc["terms"], json!([{"residue": [1, 0], "coeff": "9/1"}]));
}

#[test]
fn all_paths_agree_on_the_annulus() {
    let doc = stdout_json(&eisdist(&["eis", "parametrize", "--phi", "annulus:1,3", "--k", "1", "--path", "all"]));
    assert_eq!(doc["paths"], json!(["canonical", "orbit", "stabilizer"]));
}

#[test]
fn normal_form_expands_a_non_primitive_symbol() {
    let doc = stdout_json(&eisdist(&["eis", "normal-form", "--class", "eps:3,0@9", "--k", "1"]));
    let terms = doc["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 9);
    assert!(terms.iter().all(|t| t["coeff"] == "3/1"));
}

#[test]
fn exit_codes() {
    // malformed shorthand
    assert_eq!(eisdist(&["eis", "normal-form", "--class", "eps:1,0"]).status.code(), Some(1));
    // unknown flag
    assert_eq!(eisdist(&["orbit", "global", "--bogus"]).status.code(), Some(1));
    // inadmissible level
    assert_eq!(eisdist(&["eis", "normal-form", "--class", "eps:1,0@5"]).status.code(), Some(2));
    // not invariant under the default group K_1@3
    assert_eq!(eisdist(&["eis", "parametrize", "--phi", "basis:1,0@3", "--group", "full@3"]).status.code(), Some(2));
    // level bound
    let out = eisdist(&["--level-bound", "9", "orbit", "global", "--v", "1,0", "--M", "1", "--N", "21"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_output_round_trips() {
    let first = eisdist(&["schwartz", "show", "--phi", "annulus:3,9"]);
    let text = String::from_utf8(first.stdout.clone()).unwrap();
    let again = eisdist(&["schwartz", "show", "--phi", text.trim()]);
    assert_eq!(first.stdout, again.stdout);

    let first = eisdist(&["eis", "normal-form", "--class", "eps:3,0@9", "--k", "2"]);
    let text = String::from_utf8(first.stdout.clone()).unwrap();
    let again = eisdist(&["eis", "normal-form", "--class", text.trim(), "--k", "2"]);
    assert_eq!(first.stdout, again.stdout);
}

#[test]
fn engine_config_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_eisdist"))
        .args(["orbit", "global", "--v", "1,0", "--M", "1", "--N", "21"])
        .env("ENGINE_CONFIG", r#"{"level_bound": 9}"#)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_eisdist"))
        .args(["orbit", "global", "--v", "1,0", "--M", "1", "--N", "3"])
        .env("ENGINE_CONFIG", r#"{"p": 4}"#)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selftest_report_is_deterministic() {
    let args = ["--genus", "2", "selftest", "--levels", "3", "--json"];
    let a = eisdist(&args);
    let b = eisdist(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["format"], 1);
    assert_eq!(doc["passed"], true);
}

#[test]
fn injected_faults_are_named() {
    let out = eisdist(&["selftest", "--levels", "3", "--inject-fault", "skewed-path"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("[FAIL] criterion  4")), "{text}");

    let out = eisdist(&["selftest", "--levels", "3", "--inject-fault", "missing-coset"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("[FAIL] criterion  9")), "{text}");
}
