use std::path::Path;
use std::process::Command;

fn cmclab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cmclab")).args(args).output().expect("spawn cmclab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn lists_scenarios() {
    let (code, out, _) = cmclab(&["--list-scenarios"]);
    assert_eq!(code, 0);
    let names: Vec<&str> = out.lines().collect();
    assert_eq!(names.len(), 7);
    assert!(names.contains(&"limit-experiment"));
}

#[test]
fn positive_tau_is_a_config_error_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "[cone-flow]\ntau_start = 0.5\n");
    let out = tmp.path().join("out");
    let (code, _, err) = cmclab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_scenario_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "[riccati]\nbogus = 1\n");
    let out = tmp.path().join("out");
    assert_eq!(cmclab(&["--config", &cfg, "--out", out.to_str().unwrap()]).0, 2);
    assert_eq!(cmclab(&["--scenario", "nope", "--out", out.to_str().unwrap()]).0, 2);
    assert_eq!(cmclab(&["--out", out.to_str().unwrap()]).0, 2);
}

#[test]
fn failing_check_exits_one_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    // a tolerance nothing can meet
    let cfg = write_cfg(tmp.path(), "[riccati]\nsemigroup_tol = 1e-300\n");
    let out = tmp.path().join("out");
    let (code, _, err) = cmclab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("check,measured,expected,tolerance,pass\n"));
    assert!(summary.contains(",false\n"));
}

#[test]
fn golden_self_check_and_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cmclab(&["--scenario", "bolza-check", "--out", a.to_str().unwrap()]).0, 0);
    let (code, _, err) = cmclab(&[
        "--scenario",
        "bolza-check",
        "--out",
        b.to_str().unwrap(),
        "--check-golden",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");

    // perturb one golden value
    let gpath = a.join("bolza_generators.csv");
    let text = std::fs::read_to_string(&gpath).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cells: Vec<String> = lines[1]
        .split(',')
        .map(|c| match c.parse::<f64>() {
            Ok(v) if v != 0.0 => (v * 1.001).to_string(),
            _ => c.to_string(),
        })
        .collect();
    lines[1] = cells.join(",");
    std::fs::write(&gpath, lines.join("\n") + "\n").unwrap();
    let (code, _, err) = cmclab(&[
        "--scenario",
        "bolza-check",
        "--out",
        b.to_str().unwrap(),
        "--check-golden",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("bolza_generators.csv"));
}

#[test]
fn regenerated_cone_trace_matches_stored_golden() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let (code, _, err) = cmclab(&[
        "--config",
        root.join("cone-flow.cfg").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--check-golden",
        root.join("cone-flow").to_str().unwrap(),
        "--golden-tol",
        "1e-10",
    ]);
    assert_eq!(code, 0, "{err}");
}
