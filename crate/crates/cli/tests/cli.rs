use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn warpgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpgeo")).args(args).env_remove("WARPGEO_SEED").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

const CYLINDER: &str = r#"{
  "schema_version": 1,
  "name": "short-cylinder",
  "ambient": {"kind": "builtin", "name": "product", "params": {"base_dim": 2, "fiber_dim": 1}},
  "immersion": {"kind": "builtin", "name": "cylinder", "params": {"radius": 0.5, "half_length": 1.0}},
  "x0": [0, 0],
  "r": 0.6,
  "b": 0,
  "declared_inj_radius": 1e9,
  "distance": {"kind": "euclidean"},
  "asserted": {"weak_oy": true},
  "theorems": ["mean"]
}"#;

#[test]
fn exit_codes_of_builtins() {
    for (name, expected) in [("cylinder-in-product", 0), ("asserted-flat-disc", 1), ("bad-dimensions", 2), ("bad-expression", 3), ("degenerate-metric", 4)] {
        let out = warpgeo(&["verify", name]);
        assert_eq!(code(&out), expected, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report = stdout_json(&out);
        assert_eq!(report["exit_code"], expected, "{name}");
    }
}

#[test]
fn several_scenarios_combine_codes() {
    let out = warpgeo(&["verify", "asserted-flat-disc", "bad-dimensions", "--format", "csv"]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("id,lhs,rhs,margin,verdict,caveats\n"), "{text}");
    assert!(text.contains("asserted-flat-disc/"));
    assert!(text.contains("hypothesis-failure"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&warpgeo(&[])), 3);
    assert_eq!(code(&warpgeo(&["frobnicate"])), 3);
    assert_eq!(code(&warpgeo(&["verify", "no-such-scenario"])), 3);
    assert_eq!(code(&warpgeo(&["verify", "cylinder-in-product", "--jobs", "0"])), 3);
    assert_eq!(code(&warpgeo(&["sweep", "cylinder-in-product", "--range", "1:2"])), 3);
    assert_eq!(code(&warpgeo(&["--help"])), 0);
    assert_eq!(code(&warpgeo(&["--version"])), 0);
}

#[test]
fn out_directory_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let out = warpgeo(&["verify", "cylinder-in-product", "--out", out_dir.to_str().unwrap(), "--format", "json", "--jobs", "2"]);
    assert_eq!(code(&out), 0);
    let listed: Vec<_> = std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(listed, ["cylinder-in-product.json"]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(&listed[0])).unwrap()).unwrap();
    assert_eq!(report["results"][0]["status"], "pass");
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("wrote "));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "cyl.json", CYLINDER);
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_warpgeo"));
        cmd.args(["verify", &path, "--budget", "100"]).args(args).env_remove("WARPGEO_SEED");
        if let Some(v) = env {
            cmd.env("WARPGEO_SEED", v);
        }
        let out = cmd.output().unwrap();
        (code(&out), stdout_json(&out)["seed"].as_u64())
    };
    assert_eq!(seed_of(&[], None), (0, Some(0)));
    assert_eq!(seed_of(&[], Some("17")), (0, Some(17)));
    assert_eq!(seed_of(&["--seed", "5"], Some("17")), (0, Some(5)));
    assert_eq!(code(&{
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_warpgeo"));
        cmd.args(["verify", &path]).env("WARPGEO_SEED", "seventeen");
        cmd.output().unwrap()
    }), 3);
}

#[test]
fn same_seed_same_report() {
    let a = warpgeo(&["verify", "cylinder-in-product", "--seed", "3", "--budget", "100"]);
    let b = warpgeo(&["verify", "cylinder-in-product", "--seed", "3", "--budget", "100"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unknown_scenario_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CYLINDER.replace("\"b\": 0,", "\"b\": 0, \"bee\": 1,");
    let path = write(dir.path(), "bad.json", &bad);
    let out = warpgeo(&["verify", &path]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("bee"));
}

#[test]
fn curvature_of_round_sphere() {
    let out = warpgeo(&["curvature", "sphere-in-product", "--at", "0.3,0.2,-0.1"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!((v["sectional_min"].as_f64().unwrap() - 4.0).abs() < 1e-3, "{v}");
    assert!((v["sectional_max"].as_f64().unwrap() - 4.0).abs() < 1e-3, "{v}");
    assert!((v["scalar"].as_f64().unwrap() - 24.0).abs() < 1e-2, "{v}");
    assert!((v["mean_curvature_norm"].as_f64().unwrap() - 6.0).abs() < 1e-4, "{v}");
    assert_eq!(code(&warpgeo(&["curvature", "sphere-in-product", "--at", "0.3"])), 3);
    assert_eq!(code(&warpgeo(&["curvature", "sphere-in-product", "--at", "0.3,-4,0.1"])), 3);
}

#[test]
fn otsuki_forms() {
    let dir = tempfile::tempdir().unwrap();
    let umbilical = write(dir.path(), "umbilical.json", r#"{"components": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]]}"#);
    let out = warpgeo(&["otsuki", &umbilical]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["check_residual"].as_f64().unwrap() < 1e-10, "{v}");

    let square = write(dir.path(), "square.json", r#"{"components": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]]}"#);
    assert_eq!(code(&warpgeo(&["otsuki", &square])), 2);
    let ragged = write(dir.path(), "ragged.json", r#"{"components": [[[1, 0], [0]]]}"#);
    assert_eq!(code(&warpgeo(&["otsuki", &ragged])), 3);
    assert_eq!(code(&warpgeo(&["otsuki", dir.path().join("missing.json").to_str().unwrap()])), 3);
}

#[test]
fn oy_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let pair = |h: &str| {
        format!(
            r#"{{"h": "{h}", "gamma": "x1^2 + x2^2", "c": 2, "c_prime": 2, "cutoff": 1, "seed": 2,
            "metric": {{"kind": "euclidean", "dim": 2}},
            "sampling": {{"region": [[-20, 20], [-20, 20]], "rays": [{{"start": [0, 0], "direction": [1, 0], "t_max": 1000}}], "budget": 100}}}}"#
        )
    };
    let good = write(dir.path(), "good.json", &pair("t^2 + 1"));
    let out = warpgeo(&["oy-check", &good]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["certified"], true);

    let linear = write(dir.path(), "linear.json", &pair("t + 1"));
    assert_eq!(code(&warpgeo(&["oy-check", &linear])), 1);
    let broken = write(dir.path(), "broken.json", &pair("t^"));
    assert_eq!(code(&warpgeo(&["oy-check", &broken])), 3);
}

#[test]
fn sweep_over_radius() {
    let out = warpgeo(&["sweep", "cylinder-in-product", "--param", "r", "--range", "0.55:0.65:2", "--budget", "100"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,estimate,lhs,rhs,margin,verdict"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert!(rows[0].starts_with("0.55,mean,") && rows[1].starts_with("0.65,mean,"), "{text}");
    assert!(rows.iter().all(|r| r.ends_with(",pass")), "{text}");

    let out = warpgeo(&["sweep", "cylinder-in-product", "--range", "0.6:0.6:1", "--budget", "100", "--format", "plotdata"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# mean: r rhs\n0.6 "), "{text}");
}

#[test]
fn list_builtins_formats() {
    let text = String::from_utf8(warpgeo(&["list-builtins"]).stdout).unwrap();
    for name in ["bowl", "hopf-curve", "sphere-in-product"] {
        assert!(text.contains(name), "{name}");
    }
    let json = stdout_json(&warpgeo(&["list-builtins", "--format", "json"]));
    assert!(json.to_string().contains("degenerate-metric"));
}
