use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reigate"));
    c.env_remove("REIGATE_WORKERS");
    c
}

fn write_spec(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(kind: &str, spec: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(kind).arg("--spec").arg(spec).arg("--out").arg(out).args(extra).output().unwrap()
}

/// Drops the timestamp, the only field allowed to differ between runs.
fn strip_timestamp(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.contains("created_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

const SQ_SMALL: &str = r#"
kind = "sq-error"
[tolerances]
rel_tol = 1e-7
abs_tol = 1e-7
[sq_error]
gates = ["X", "sqrtY"]
"#;

#[test]
fn windows_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "w.toml", "[windows]\nspan_mhz = 2000.0\n");
    let out = dir.path().join("out");
    let o = run("windows", &spec, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("windows.json")).unwrap()).unwrap();
    let w0 = &v["result"]["window_0"];
    let w1 = &v["result"]["window_1"];
    assert!((w0[1].as_f64().unwrap() - 9.1).abs() < 1e-6);
    assert!((w1[0].as_f64().unwrap() + 35.9).abs() < 1e-6);
    assert!((w1[1].as_f64().unwrap() - 14.6).abs() < 1e-6);
    assert_eq!(v["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(v["metadata"]["tool"], "reigate");
}

#[test]
fn malformed_spec_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in ["[sq_error\nmask = ", "[sq_error]\nmask = \"sideways\"\n", "[sq_error]\ngates = [\"Q\"]\n", "unknown = 1\n"]
        .iter()
        .enumerate()
    {
        let spec = write_spec(dir.path(), &format!("bad{i}.toml"), text);
        let o = run("sq-error", &spec, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "validation");
        assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
    }
}

#[test]
fn missing_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("windows", &dir.path().join("nope.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stochastic_kind_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "b.toml", "[benchmark]\nn_gates = 5\nrepeats = 2\n");
    let out = dir.path().join("out");
    let o = run("benchmark", &spec, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_tolerance_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "t.toml", "[tolerances]\nrel_tol = 0.5\nabs_tol = 1e-8\n[windows]\n");
    let o = run("windows", &spec, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "sq.toml", SQ_SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("sq-error", &spec, &a, &["--workers", "1"]).status.success());
    assert!(run("sq-error", &spec, &b, &["--workers", "1"]).status.success());
    for f in ["sq_error.csv", "sq_error.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(strip_timestamp(&x), strip_timestamp(&y), "{f}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "b.toml",
        "seed = 5\n[tolerances]\nrel_tol = 1e-7\nabs_tol = 1e-7\n[benchmark]\nn_gates = 20\nrepeats = 4\nphase_grid = 7\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("benchmark", &spec, &a, &["--workers", "1"]).status.success());
    let o = bin()
        .args(["benchmark", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&b)
        .env("REIGATE_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = std::fs::read(a.join("benchmark.csv")).unwrap();
    let y = std::fs::read(b.join("benchmark.csv")).unwrap();
    assert_eq!(strip_timestamp(&x), strip_timestamp(&y));
}

#[test]
fn seed_flag_overrides_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "b.toml",
        "seed = 5\n[tolerances]\nrel_tol = 1e-7\nabs_tol = 1e-7\n[benchmark]\nn_gates = 10\nrepeats = 2\nphase_grid = 7\n",
    );
    let out = dir.path().join("o");
    assert!(run("benchmark", &spec, &out, &["--seed", "9"]).status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("benchmark.json")).unwrap()).unwrap();
    assert_eq!(v["metadata"]["seed"], 9);
}

#[test]
fn bad_worker_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "w.toml", "[windows]\n");
    let o = bin().args(["windows", "--spec"]).arg(&spec).arg("--out").arg(dir.path().join("o")).env("REIGATE_WORKERS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn custom_ion_config_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reigate::ion_model::DEFAULT_ION_CONFIG.replace("t2_optical = 2.6e-3", "t2_optical = 2.0e-3");
    std::fs::write(dir.path().join("ion.toml"), &cfg).unwrap();
    let spec = write_spec(dir.path(), "w.toml", "ion_config = \"ion.toml\"\n[windows]\n");
    let plain = write_spec(dir.path(), "p.toml", "[windows]\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("windows", &spec, &a, &[]).status.success());
    assert!(run("windows", &plain, &b, &[]).status.success());
    let read = |p: PathBuf| -> serde_json::Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };
    assert_ne!(read(a.join("windows.json"))["metadata"]["config_sha256"], read(b.join("windows.json"))["metadata"]["config_sha256"]);
}

#[test]
fn shipped_specs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        let v: toml::Value = toml::from_str(&text).unwrap();
        assert!(v.get("kind").is_some(), "{}", p.display());
        n += 1;
    }
    assert!(n >= 8);
}
