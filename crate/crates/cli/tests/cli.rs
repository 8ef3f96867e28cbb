use std::path::Path;
use std::process::Command;

fn nelson(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_nelson"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .arg("--log")
        .arg("warn")
        .status()
        .expect("binary runs")
        .code()
        .expect("exit code")
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    lines.next().unwrap();
    lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn missing_config_exits_1_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = nelson(&["selfcheck", "--config", "/nonexistent/run.toml"], &out);
    assert_eq!(code, 1);
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\nlenght = 4.0\n").unwrap();
    assert_eq!(nelson(&["selfcheck", "--config", cfg.to_str().unwrap()], &dir.path().join("out")), 1);
}

#[test]
fn default_config_round_trips() {
    let text = Command::new(env!("CARGO_BIN_EXE_nelson")).arg("default-config").output().unwrap();
    assert!(text.status.success());
    let cfg = nelson_core::config::RunConfig::from_toml(std::str::from_utf8(&text.stdout).unwrap()).unwrap();
    assert_eq!(cfg.to_toml(), nelson_core::config::RunConfig::default().to_toml());
}

#[test]
fn dressing_check_writes_summary_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(nelson(&["dressing-check"], &a), 0);
    assert_eq!(nelson(&["dressing-check"], &b), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("dressing-check/summary.json")).unwrap()).unwrap();
    for key in ["command", "config_hash", "version", "wall_seconds", "assertions"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(summary["command"], "dressing-check");
    let asserts = summary["assertions"].as_array().unwrap();
    assert_eq!(asserts.len(), 3);
    assert!(asserts.iter().all(|x| x["pass"] == true));
    let csv_a = std::fs::read(a.join("dressing-check/dressing.csv")).unwrap();
    let csv_b = std::fs::read(b.join("dressing-check/dressing.csv")).unwrap();
    let (text_a, text_b) = (String::from_utf8(csv_a).unwrap(), String::from_utf8(csv_b).unwrap());
    // the hash covers output_dir, so only the body must match
    assert_eq!(text_a.split_once('\n').unwrap().1, text_b.split_once('\n').unwrap().1);
    let hash = summary["config_hash"].as_str().unwrap();
    assert!(text_a.starts_with(&format!("# config_hash={hash}\n")));
}

#[test]
fn selfcheck_passes_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[grid]\nlength = 4.0\npoints = 16\n").unwrap();
    assert_eq!(nelson(&["selfcheck", "--config", cfg.to_str().unwrap()], &dir.path().join("out")), 0);
}

#[test]
fn free_field_akg_keeps_the_field_norm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[grid]\nlength = 4.0\npoints = 16\n\n[akg]\nt_end = 0.05\noutput_every = 5\nforce_free_field = true\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(nelson(&["akg", "--config", cfg.to_str().unwrap()], &out), 0);
    let rows = csv_rows(&out.join("akg/trajectory.csv"));
    assert_eq!(rows.len(), 11);
    let n0 = rows[0][1];
    assert!(rows.iter().all(|r| (r[1] - n0).abs() <= 1e-12 * n0));
    assert!(out.join("akg/phi_final.fgrid").exists());
}
