use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nczeta(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nczeta"))
        .args(args)
        .env("NCZETA_CACHE_DIR", cache)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn golden_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "golden"].iter().collect()
}

#[test]
fn verify_all_states_the_conclusion() {
    let cache = tempfile::tempdir().unwrap();
    let golden = golden_dir();
    let o = nczeta(&["verify", "--all", "--golden", golden.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("conclusion: ζ(0) is independent of k and τ; ζ(0) = −1"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_modular_json_certificate() {
    let cache = tempfile::tempdir().unwrap();
    let o = nczeta(&["verify", "--stage", "modular", "--format", "json"], cache.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["f_match", "h_match", "K_odd"] {
        assert_eq!(v[key], true, "{key}");
    }
    assert_eq!(v["slot_ratios"].as_array().unwrap().len(), 4);
    assert_eq!(v["conclusion"], "ζ(0) is independent of k and τ; ζ(0) = −1");
}

#[test]
fn reports_are_byte_identical() {
    let cache = tempfile::tempdir().unwrap();
    let a = nczeta(&["verify", "--format", "json"], cache.path());
    let b = nczeta(&["verify", "--format", "json"], cache.path());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn missing_golden_is_a_usage_error() {
    let cache = tempfile::tempdir().unwrap();
    let empty = tempfile::tempdir().unwrap();
    let o = nczeta(&["verify", "--golden", empty.path().to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b2_printed.txt"));
}

#[test]
fn injected_fault_fails_with_exit_1() {
    let cache = tempfile::tempdir().unwrap();
    let o = nczeta(&["verify", "--inject-fault", "direct:2"], cache.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("injected fault: direct:2"));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_2() {
    let cache = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["verify", "--inject-fault", "nowhere:1"],
        &["parametrix", "--order", "7"],
        &["eval-spectral", "--fn", "f", "--u", "-1"],
    ] {
        assert_eq!(nczeta(args, cache.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn parametrix_order_zero_is_b0() {
    let cache = tempfile::tempdir().unwrap();
    let o = nczeta(&["parametrix", "--order", "0"], cache.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "[1] b0^1\n");
}

#[test]
fn parametrix_then_reduce() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let b2 = dir.path().join("b2.txt");
    let out = dir.path().join("modular.json");
    let o = nczeta(&["parametrix", "--order", "2", "--out", b2.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&b2).unwrap();
    let golden = std::fs::read_to_string(golden_dir().join("b2_printed.txt")).unwrap();
    assert_eq!(text, golden);
    // second run comes from the cache and is byte-identical
    let again = nczeta(&["parametrix", "--order", "2"], cache.path());
    assert_eq!(again.stdout, text.as_bytes());

    let o = nczeta(&["reduce", "--in", b2.to_str().unwrap(), "--out", out.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let modular = std::fs::read_to_string(golden_dir().join("premain_modular.txt")).unwrap();
    assert_eq!(v["modular_terms"], modular.as_str());
}

#[test]
fn reduce_rejects_malformed_input() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "[1] b0^1 frob\n").unwrap();
    let o = nczeta(&["reduce", "--in", bad.to_str().unwrap()], cache.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_symbol_prints_a2() {
    let cache = tempfile::tempdir().unwrap();
    let o = nczeta(&["build-symbol"], cache.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("a2 = xi1^2*k^2 + (tau1^2+tau2^2)*xi2^2*k^2 + 2*tau1*xi1*xi2*k^2\n"));
}

#[test]
fn oracle_small_battery() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = nczeta(
        &["oracle", "--trials", "6", "--dim", "4", "--seed", "7", "--tol", "1e-9", "--out", out.to_str().unwrap()],
        cache.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["trials"].as_array().unwrap().len(), 6);
    assert_eq!(v["trials"][0]["seed"], 7);
    assert_eq!(v["passed"], true);
}

#[test]
fn eval_spectral_values() {
    let cache = tempfile::tempdir().unwrap();
    let eval = |args: &[&str]| -> f64 {
        let o = nczeta(args, cache.path());
        assert_eq!(o.status.code(), Some(0));
        stdout(&o).trim().parse().unwrap()
    };
    // L_m(1) = 1/(m+1); f(1) = 0
    assert!((eval(&["eval-spectral", "--fn", "l2", "--u", "1"]) - 1.0 / 3.0).abs() < 1e-15);
    assert!(eval(&["eval-spectral", "--fn", "f", "--u", "1"]).abs() < 1e-14);
    let kp = eval(&["eval-spectral", "--fn", "k", "--x", "0.8"]);
    let km = eval(&["eval-spectral", "--fn", "k", "--x", "-0.8"]);
    assert!((kp + km).abs() < 1e-14);
    assert_eq!(eval(&["eval-spectral", "--fn", "k", "--x", "0"]), 0.0);
}
