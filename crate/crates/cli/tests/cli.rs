use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cfloor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfloor")).args(args).output().unwrap()
}

fn config(dir: &Path, name: &str, beta: f64, k: f64, l: f64) -> PathBuf {
    let path = dir.join(name);
    let json = format!(r#"{{"r":0.03,"mu":0.05,"sigma":0.2,"beta":{beta},"p":0.5,"k":{k},"l":{l}}}"#);
    fs::write(&path, json).unwrap();
    path
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn classify_reports_case_and_constants() {
    let tmp = TempDir::new().unwrap();
    let out = cfloor(&["classify", s(&config(tmp.path(), "a.json", 0.1, 0.02, 1.0))]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["case"], "NonHomogeneous");
    assert!((v["kappa"].as_f64().unwrap() - 0.1075).abs() < 1e-12);
    assert!((v["x_e"].as_f64().unwrap() - 100.0).abs() < 1e-12);
    assert!((v["c_e"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let out = cfloor(&["classify", s(&config(tmp.path(), "b.json", 0.1, 0.05, 1.0))]);
    assert!(out.status.success());
    assert_eq!(json(&out.stdout), serde_json::json!({"case": "InfeasibleAll"}));

    let out = cfloor(&["classify", s(&config(tmp.path(), "c.json", 0.1, 0.0, 0.0))]);
    assert_eq!(json(&out.stdout)["case"], "MertonUnconstrained");
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"r":0.03,"mu":0.05,"sigma":-0.2,"beta":0.1,"p":0.5,"k":0,"l":1}"#).unwrap();
    assert_eq!(cfloor(&["classify", s(&bad)]).status.code(), Some(2));
    fs::write(&bad, r#"{"r":0.03,"typo":1}"#).unwrap();
    assert_eq!(cfloor(&["classify", s(&bad)]).status.code(), Some(2));
    let missing = tmp.path().join("missing.json");
    assert_eq!(cfloor(&["classify", s(&missing)]).status.code(), Some(2));

    let infeasible = config(tmp.path(), "inf.json", 0.1, 0.05, 1.0);
    let out = cfloor(&["solve", s(&infeasible), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no finite wealth"));

    let base = config(tmp.path(), "base.json", 0.1, 0.02, 1.0);
    let out = cfloor(&["simulate", s(&base), "--x0", "99", "--paths", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cfloor(&["verify", s(&base), "--out", s(&tmp.path().join("nothing"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn state_independent_solve_finds_the_boundary() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "k0.json", 0.1, 0.0, 1.0);
    let dir = tmp.path().join("out");
    assert!(cfloor(&["solve", s(&cfg), "--out", s(&dir)]).status.success());
    let summary = json(&fs::read(dir.join("summary.json")).unwrap());
    let xs = summary["x_star_list"].as_array().unwrap();
    assert_eq!(xs.len(), 1);
    // oracle: root of the closed-form linear system, see the core crate's tests
    assert!((xs[0].as_f64().unwrap() - 36.51256).abs() < 1e-2);
    assert_eq!(summary["checks_pass"], true);
    for f in ["summary.json", "dual.csv", "policy.csv", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn homogeneous_policy_is_linear_in_wealth() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "hom.json", 0.1, 0.2, 0.0);
    let dir = tmp.path().join("out");
    assert!(cfloor(&["solve", s(&cfg), "--out", s(&dir), "--nodes", "300"]).status.success());
    let text = fs::read_to_string(dir.join("policy.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,V,V_x,V_xx,c_star,pi_star,region");
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let x: f64 = f[0].parse().unwrap();
        let c: f64 = f[4].parse().unwrap();
        // max(kappa, k) = max(0.1075, 0.2)
        assert!((c / x - 0.2).abs() < 1e-12, "{line}");
        rows += 1;
    }
    assert!(rows > 250);
}

#[test]
fn verify_round_trips_and_rejects_corruption() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "base.json", 0.1, 0.02, 1.0);
    let dir = tmp.path().join("out");
    assert!(cfloor(&["solve", s(&cfg), "--out", s(&dir)]).status.success());
    assert!(cfloor(&["verify", s(&cfg), "--out", s(&dir)]).status.success());
    let summary = json(&fs::read(dir.join("summary.json")).unwrap());
    let report = fs::read(dir.join("report.json")).unwrap();
    assert_eq!(
        summary["check_digest"].as_str().unwrap(),
        sha256_hex(&report),
        "report of the re-read files must match the digest recorded at solve time"
    );
    let manifest = json(&fs::read(dir.join("manifest.json")).unwrap());
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["command"], "solve");
    assert_eq!(runs[1]["command"], "verify");
    assert_eq!(runs[0]["config_digest"], runs[1]["config_digest"]);

    // scale the value column by 1.01
    let text = fs::read_to_string(dir.join("policy.csv")).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let mut f: Vec<String> = line.split(',').map(str::to_string).collect();
            let v: f64 = f[1].parse().unwrap();
            f[1] = format!("{:.16e}", 1.01 * v);
            out.push_str(&f.join(","));
        }
        out.push('\n');
    }
    fs::write(dir.join("policy.csv"), out).unwrap();
    let res = cfloor(&["verify", s(&cfg), "--out", s(&dir)]);
    assert_eq!(res.status.code(), Some(4));
    let report = json(&fs::read(dir.join("report.json")).unwrap());
    assert_eq!(report["overall"], false);

    fs::write(dir.join("policy.csv"), "x,V\n1,2\n").unwrap();
    assert_eq!(cfloor(&["verify", s(&cfg), "--out", s(&dir)]).status.code(), Some(2));
}

#[test]
fn intermediate_regime_region_check_passes_with_note() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "mid.json", 0.058, 0.02, 1.0);
    let dir = tmp.path().join("out");
    assert!(cfloor(&["solve", s(&cfg), "--out", s(&dir)]).status.success());
    assert!(cfloor(&["verify", s(&cfg), "--out", s(&dir)]).status.success());
    let report = json(&fs::read(dir.join("report.json")).unwrap());
    let region = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "region_theorems")
        .unwrap();
    assert_eq!(region["pass"], true);
    assert!(region["note"].as_str().is_some());
}

#[test]
fn simulate_marginal_wealth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "base.json", 0.1, 0.02, 1.0);
    let x_e = format!("{}", 1.0 / (0.03 - 0.02));
    let out = cfloor(&[
        "simulate", s(&cfg), "--x0", &x_e, "--paths", "16", "--dt", "0.02", "--horizon", "50",
        "--policy", "optimal",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_eq!(v["report"]["std_error"].as_f64().unwrap(), 0.0);
    let v_xe = 3f64.sqrt() * 20.0;
    let expected = -(-0.1f64 * 50.0).exp_m1() * v_xe;
    let est = v["report"]["estimate"].as_f64().unwrap();
    assert!((est - expected).abs() <= 1e-12 * expected, "{est} vs {expected}");
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
