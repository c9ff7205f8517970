use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn manifests() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/manifests")
}

fn envmor(sub: &str, manifest: &Path, out: &Path, extra: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_envmor"))
        .arg(sub)
        .arg("--manifest")
        .arg(manifest)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("manifest.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn build_rlc_envelope() {
    let out = TempDir::new().unwrap();
    assert_eq!(envmor("build", &manifests().join("rlc.json"), out.path(), &[]), 0);
    let meta = json(out.path().join("metadata.json"));
    assert_eq!(meta["states"], 2);
    assert_eq!(meta["delta_ranks"], serde_json::json!([1]));
    assert_eq!(meta["envelope_inputs"], 3);
    assert_eq!(meta["envelope_outputs"], 3);
    for f in ["A", "B", "C", "D", "M_2"] {
        assert!(out.path().join(format!("envelope/{f}.mtx")).is_file(), "{f}");
    }
}

#[test]
fn single_mode_envelope_is_the_system() {
    let dir = TempDir::new().unwrap();
    let a = "%%MatrixMarket matrix array real general\n2 2\n-1\n0.5\n0\n-2\n";
    fs::write(dir.path().join("A.mtx"), a).unwrap();
    fs::write(dir.path().join("B.mtx"), "%%MatrixMarket matrix array real general\n2 1\n1\n0\n").unwrap();
    fs::write(dir.path().join("C.mtx"), "%%MatrixMarket matrix array real general\n1 2\n0\n1\n").unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"version": 1,
            "system": {"files": [{"a": "A.mtx", "b": "B.mtx", "c": "C.mtx"}]},
            "switching": {"kind": "time_driven", "breakpoints": [0], "modes": [1]},
            "input": {"channels": [{"kind": "constant", "level": 1}]},
            "simulation": {"horizon": 1}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(envmor("build", &m, &out, &[]), 0);
    let original = envmor::io::read_matrix_market(dir.path().join("A.mtx")).unwrap();
    assert_eq!(
        fs::read_to_string(out.join("envelope/A.mtx")).unwrap(),
        envmor::io::format_matrix_market(&original)
    );
    assert_eq!(json(out.join("metadata.json"))["envelope_inputs"], 1);
}

#[test]
fn simulate_rlc_reaches_exp_minus_one() {
    let out = TempDir::new().unwrap();
    assert_eq!(envmor("simulate", &manifests().join("rlc.json"), out.path(), &[]), 0);
    let s = json(out.path().join("simulation.json"));
    let y = s["final_output"][0].as_f64().unwrap();
    assert!((y - (-1f64).exp()).abs() < 1e-8, "{y}");
    let yr = s["reduced"]["final_output"][0].as_f64().unwrap();
    assert!((yr - y).abs() < 1e-6);
    let csv = fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,y_1,mode\n"));
}

#[test]
fn hsv_on_heat() {
    let out = TempDir::new().unwrap();
    assert_eq!(envmor("hsv", &manifests().join("heat.json"), out.path(), &[]), 0);
    let text = fs::read_to_string(out.path().join("hsv_mode_2.csv")).unwrap();
    let second: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let normalized: f64 = second[2].parse().unwrap();
    assert!((normalized - 0.128368).abs() < 1e-5, "{normalized}");
    assert!(out.path().join("hsv.csv").is_file());
}

#[test]
fn bound_rejects_output_driven_switching() {
    let out = TempDir::new().unwrap();
    let code = envmor("bound", &manifests().join("heat_hysteresis.json"), out.path(), &[]);
    assert_eq!(code, 4);
    assert_eq!(json(out.path().join("error.json"))["error"]["kind"], "unsupported");
}

#[test]
fn invalid_manifest_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(dir.path(), r#"{"version": 7, "system": {"builtin": {"name": "rlc"}}}"#);
    assert_eq!(envmor("build", &m, &dir.path().join("out"), &[]), 2);
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"version": 1, "system": {"builtin": {"name": "random", "seed": 5}},
            "reduction": {"method": "irka", "r": 4}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(envmor("reduce", &m, out, &["--seed", "11"]), 0);
    }
    for f in ["report.json", "reduced/V.mtx", "reduced/envelope/A.mtx", "reduced/mode_1/A.mtx"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
