//! End-to-end runs of the command line through `cli::run`.

use std::fs;
use std::path::Path;

use melnikov_kit::cli::run;
use serde_json::Value;
use tempfile::TempDir;

const VDP: &str = r#"{
  "pencil": { "F": "(x^2 + y^2)/2" },
  "deformation": [ { "dx": "(x^2 - 1)*y", "dy": "0" } ]
}"#;

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

/// Runs the CLI with `--out` into the temp dir and returns (exit code, output).
fn exec(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = dir.join("out.txt");
    let _ = fs::remove_file(&out);
    let mut full = vec!["melnikov-kit".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    full.push("--out".into());
    full.push(out.to_string_lossy().into_owned());
    let code = run(full);
    (code, fs::read_to_string(&out).unwrap_or_default())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("bad json ({e}): {text}"))
}

#[test]
fn melnikov_csv_brackets_zero_at_two() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "vdp.json", VDP);
    let (code, csv) = exec(dir.path(), &["melnikov", "--spec", &spec, "--levels", "0.1:2.5:25", "--format", "csv"]);
    assert_eq!(code, 0, "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("# config:")));
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t_re"))
        .map(|l| {
            let c: Vec<f64> = l.split(',').map(|v| v.trim().parse().unwrap()).collect();
            (c[0], c[2])
        })
        .collect();
    assert_eq!(rows.len(), 25);
    let changes: Vec<_> = rows.windows(2).filter(|w| w[0].1.signum() != w[1].1.signum()).collect();
    assert_eq!(changes.len(), 1);
    assert!(changes[0][0].0 <= 2.0 + 1e-12 && changes[0][1].0 >= 2.0 - 1e-12);

    let samples = write(dir.path(), "m.csv", &csv);
    let (code, out) = exec(dir.path(), &["count-zeros", "--in", &samples, "--segment", "0.1", "2.5", "--t0", "2"]);
    assert_eq!(code, 0, "{out}");
    let rep = json(&out);
    assert_eq!(rep["count"], 1);
    let zeros = rep["report"]["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 1);
    assert!(zeros[0]["lo"].as_f64().unwrap() < 2.0 && zeros[0]["hi"].as_f64().unwrap() > 2.0);
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "vdp.json", VDP);
    let args = ["melnikov", "--spec", &spec, "--levels", "0.5,1,1.5", "--format", "csv"];
    let (_, a) = exec(dir.path(), &args);
    let (_, b) = exec(dir.path(), &args);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn tangent_test_finds_witness_and_reports_infeasible() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "pencil.json", r#"{ "pencil": { "F": "x^2 + y^2 - 1", "G": "x + 2*y + 3", "p": 1, "q": 2 } }"#);
    // 2ω₀ = 2(p G dF − q F dG)
    let (code, out) = exec(
        dir.path(),
        &["tangent-test", "--spec", &spec, "--form", "8*x*y + 12*x - 4*y^2 + 4, 4*x*y + 12*y - 8*x^2 + 8"],
    );
    assert_eq!(code, 0, "{out}");
    let rep = json(&out);
    assert_eq!(rep["tangent"], true);
    assert_eq!(rep["residual_zero"], true);

    let (code, out) = exec(dir.path(), &["tangent-test", "--spec", &spec, "--form", "y^2, 0"]);
    assert_eq!(code, 2, "{out}");
    assert_eq!(json(&out)["tangent"], false);
}

#[test]
fn center_report_for_hamiltonian_is_all_zero() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "germ.json", r#"{ "form": { "dx": "y + 3*x^2", "dy": "x - 2*y + 4*y^3" } }"#);
    let (code, out) = exec(dir.path(), &["center-obstructions", "--spec", &spec, "--max-order", "10"]);
    assert_eq!(code, 0, "{out}");
    let rep = json(&out);
    assert_eq!(rep["all_zero"], true, "{out}");
    assert_eq!(rep["command"], "center-obstructions");

    let spec = write(dir.path(), "generic.json", r#"{ "form": { "dx": "y + x^2 + 2*x*y^2", "dy": "x + y^2 - x^2*y" } }"#);
    let (code, out) = exec(dir.path(), &["center-obstructions", "--spec", &spec, "--max-order", "6"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(json(&out)["all_zero"], false);
}

#[test]
fn decompose_exact_form() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "h.json", r#"{ "pencil": { "F": "x*y" } }"#);
    // d(x^2) + x·d(xy)
    let (code, out) = exec(dir.path(), &["decompose", "--spec", &spec, "--form", "2*x + x*y, x^2"]);
    assert_eq!(code, 0, "{out}");
    let rep = json(&out);
    assert_eq!(rep["residual_zero"], true, "{out}");
}

#[test]
fn errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let (code, _) = exec(dir.path(), &["critical-values", "--spec", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    let bad = write(dir.path(), "bad.json", r#"{ "pencil": { "F": "x^^2" } }"#);
    let (code, _) = exec(dir.path(), &["critical-values", "--spec", &bad]);
    assert_eq!(code, 1);
    let (code, _) = exec(dir.path(), &["no-such-command"]);
    assert_eq!(code, 1);
    let vdp = write(dir.path(), "vdp.json", VDP);
    let (code, _) = exec(dir.path(), &["melnikov", "--spec", &vdp, "--levels", "1", "--vertices", "2"]);
    assert_eq!(code, 1);
}

#[test]
fn trace_then_integrate() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "xy.json", r#"{ "pencil": { "F": "x*y" } }"#);
    let (code, cycle) = exec(dir.path(), &["trace-cycle", "--spec", &spec, "--from-critical", "0", "--level", "0.5"]);
    assert_eq!(code, 0, "{cycle}");
    let cpath = write(dir.path(), "cycle.json", &cycle);
    let (code, out) = exec(dir.path(), &["integrate", "--spec", &spec, "--cycle", &cpath, "--form", "y, 0"]);
    assert_eq!(code, 0, "{out}");
    let rep = json(&out);
    let text = rep.to_string();
    // ∫ y dx = ±2πi·t
    assert!(text.contains("3.14159265"), "{text}");
}
