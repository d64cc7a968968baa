use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn floorsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floorsync")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn path(dir: &Path, name: &str) -> (PathBuf, String) {
    let p = dir.join(name);
    let s = p.to_string_lossy().into_owned();
    (p, s)
}

fn run_trace(dir: &Path, name: &str, seed: &str, ticks: &str) -> PathBuf {
    let (p, s) = path(dir, name);
    let out = floorsync(&["run", "--config", &scenario("default.toml"), "--seed", seed, "--ticks", ticks, "--out", &s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_trace(dir.path(), "a.jsonl", "42", "2000");
    let b = run_trace(dir.path(), "b.jsonl", "42", "2000");
    let c = run_trace(dir.path(), "c.jsonl", "43", "2000");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_ne!(bytes, std::fs::read(&c).unwrap());
    assert_eq!(String::from_utf8(bytes).unwrap().lines().count(), 2002);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["default.toml", "triad_oracle.toml"] {
        assert_eq!(floorsync(&["validate", "--config", &scenario(name)]).status.code(), Some(0), "{name}");
    }

    let (p, s) = path(dir.path(), "solo.toml");
    std::fs::write(&p, "[[agents]]\nid = 0\n").unwrap();
    let out = floorsync(&["validate", "--config", &s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("agents"));

    let (p, s) = path(dir.path(), "typo.toml");
    std::fs::write(&p, "[[agents]]\nid = 0\n[[agents]]\nid = 1\n[dynamics]\ndelta_likeing = 0.1\n").unwrap();
    let out = floorsync(&["validate", "--config", &s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dynamics"));

    let (p, s) = path(dir.path(), "range.toml");
    std::fs::write(&p, "[[agents]]\nid = 0\ntalkativeness = 1.5\n[[agents]]\nid = 1\n").unwrap();
    let out = floorsync(&["validate", "--config", &s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("agents[0].talkativeness"));

    assert_eq!(floorsync(&["validate"]).status.code(), Some(1));
    assert_eq!(floorsync(&["validate", "--config", "/nonexistent/x.toml"]).status.code(), Some(1));
    assert_eq!(floorsync(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(floorsync(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_is_stable_and_honours_lag() {
    let dir = tempfile::tempdir().unwrap();
    let trace = run_trace(dir.path(), "t.jsonl", "7", "3000");
    let trace = trace.to_string_lossy().into_owned();
    let load = |name: &str, lag: &str| -> serde_json::Value {
        let (p, s) = path(dir.path(), name);
        let out = floorsync(&["analyze", "--trace", &trace, "--out", &s, "--lag", lag]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(p.with_extension("csv").is_file());
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    let first = load("r1.json", "0");
    let again = load("r2.json", "0");
    assert_eq!(first, again);
    let lagged = load("r3.json", "-3");
    assert_eq!(lagged["report"]["lag"], -3);
    assert_ne!(lagged["report"]["pairwise_state_mi"], first["report"]["pairwise_state_mi"]);
}

#[test]
fn analyze_rejects_malformed_trace() {
    let dir = tempfile::tempdir().unwrap();
    let good = run_trace(dir.path(), "t.jsonl", "1", "50");
    let text = std::fs::read_to_string(&good).unwrap();
    let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n") + "\n{\"tick\": 9, \"sta";
    let (p, s) = path(dir.path(), "bad.jsonl");
    std::fs::write(&p, truncated).unwrap();
    let (_, out) = path(dir.path(), "r.json");
    let res = floorsync(&["analyze", "--trace", &s, "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 11"), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn sweep_rejects_bad_range() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = path(dir.path(), "sweep");
    let res = floorsync(&["sweep", "--config", &scenario("default.toml"), "--seeds", "8..1", "--out", &out]);
    assert_eq!(res.status.code(), Some(1));
}
