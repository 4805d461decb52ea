use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "core",
        "scenarios",
        &format!("{name}.cfg"),
    ]
    .iter()
    .collect()
}

fn lrinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrinv"))
        .args(args)
        .output()
        .unwrap()
}

fn run(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        verb,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    lrinv(&args)
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn constant_force_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("validate", &scenario("constant_force"), dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("oracle_infidelity"));
    assert!(stdout.trim_end().ends_with("validate: pass"));
}

#[test]
fn non_elliptic_exits_two_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("solve", &scenario("non_elliptic"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("not elliptic"), "{stderr}");
    assert_eq!(report(dir.path())["status"], "error");
}

#[test]
fn failing_check_exits_one() {
    // The default packet spreads into the edge of this narrow box by t = 5.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("edge.cfg");
    let text = std::fs::read_to_string(scenario("focusing")).unwrap();
    let trimmed: String = text
        .lines()
        .filter(|l| !l.starts_with("packet_"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&cfg, trimmed).unwrap();
    let out_dir = dir.path().join("out");
    let out = run("validate", &cfg, &out_dir, &[]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert_eq!(report(&out_dir)["status"], "fail");
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mass = 1\nfrobnicate = 3\n").unwrap();
    let out = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
}

#[test]
fn branch_override_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "solve",
        &scenario("free_particle"),
        dir.path(),
        &["--branch", "linear"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path())["branch"], "linear");
    assert!(dir.path().join("coefficients_linear.csv").exists());
    assert!(!dir.path().join("coefficients_quadratic.csv").exists());
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run("solve", &scenario("cosine_drive"), dir.path(), &[]);
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn propagate_and_match_square_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("propagate", &scenario("table_drive"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("run_metadata.json").exists());

    let dir = tempfile::tempdir().unwrap();
    let out = run("match-square", &scenario("constant_force"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("square_match.json").exists());
}
