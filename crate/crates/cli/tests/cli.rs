use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actstab"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn list_models_shows_the_examples() {
    let out = bin().arg("list-models").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["example-2.2", "example-3.6", "example-3.7", "m > 1, default 2", "lambda: expansion, default 2"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
    let json = bin().args(["list-models", "--json"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn default_shadowing_run_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"shadowing\"\nseed = 12\n").unwrap();
    let out = run_config(&cfg, &tmp.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["passed"], true);
    assert!(s["statistics"]["max_tracing_radius"].as_f64().unwrap() <= 1e-3);
    // The resolved config, defaults included, is embedded.
    assert_eq!(s["config"]["ball_radius"], 20);
    assert_eq!(s["config"]["solver"]["cells"], 64);
    assert_eq!(s["config"]["model"]["lambda"], 2.0);
}

#[test]
fn isometric_expansivity_fails_and_names_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("expansivity_isometric.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL  every pair separated within the ball"));
    assert_eq!(summary(tmp.path())["passed"], false);
}

#[test]
fn invalid_config_exits_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"shadowing\"\nseed = 1\n[samples]\ncount = 0\n").unwrap();
    let out = run_config(&cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samples.count"));
    assert!(!tmp.path().join("o").exists());

    std::fs::write(&cfg, "experiment = \"shadowing\"\n").unwrap();
    let out = bin().args(["validate-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["validate-config", "--seed", "5", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed = 5"));
}

#[test]
fn seed_flag_overrides_and_reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("persistence.toml");
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    run_config(&cfg, &dirs[0], &["--seed", "99", "--jobs", "2"]);
    run_config(&cfg, &dirs[1], &["--seed", "99"]);
    run_config(&cfg, &dirs[2], &["--seed", "100"]);
    let read = |d: &PathBuf| std::fs::read(d.join("detail.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
    assert_eq!(summary(&dirs[0])["config"]["seed"], 99);
}
