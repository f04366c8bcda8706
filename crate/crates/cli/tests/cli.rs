use std::path::Path;
use std::process::{Command, Output};

fn blindssr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindssr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/table1.toml")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn exact_prints_reference_row() {
    let o = blindssr(&[
        "exact",
        "--n1",
        "12",
        "--alpha",
        "0.05",
        "--delta-up",
        "0.5",
        "--stop-df",
        "within",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    for v in [
        "0.0401", "0.5946", "0.0674", "0.0603", "0.0009", "0.0015", "0.0212",
    ] {
        assert!(row.contains(v), "{v} missing from {row}");
    }
}

#[test]
fn fixed_design_scenario_near_five_percent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = blindssr(&[
        "scenario",
        "--n-stage1",
        "15",
        "--n-min",
        "15",
        "--n-max",
        "15",
        "--delta0",
        "1",
        "--reps",
        "100000",
        "--seed",
        "5",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let pct: f64 = text
        .split("ni_reject=")
        .nth(1)
        .unwrap()
        .split('%')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((pct - 5.0).abs() < 0.21, "{pct}");
    assert!(dir.path().join("scenario.csv").exists());
}

#[test]
fn same_seed_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = blindssr(&[
            "scenario",
            "--n-stage1",
            "10",
            "--n-min",
            "12",
            "--n-max",
            "inf",
            "--delta0",
            "0.5,1.0",
            "--reps",
            "5000",
            "--seed",
            "9",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = std::fs::read(a.path().join("scenario.csv")).unwrap();
    let y = std::fs::read(b.path().join("scenario.csv")).unwrap();
    assert_eq!(x, y);
    assert_eq!(
        std::fs::read(a.path().join("curve.svg")).unwrap(),
        std::fs::read(b.path().join("curve.svg")).unwrap()
    );
}

#[test]
fn missing_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = blindssr(&[
        "scenario",
        "--n-stage1",
        "15",
        "--n-min",
        "15",
        "--n-max",
        "15",
        "--delta0",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("master_seed"));
}

#[test]
fn unknown_subcommand_shows_usage() {
    let o = blindssr(&["frobnicate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn inconsistent_rule_rejected() {
    let o = blindssr(&[
        "scenario",
        "--n-stage1",
        "15",
        "--n-min",
        "20",
        "--n-max",
        "18",
        "--delta0",
        "1",
        "--seed",
        "1",
    ]);
    assert!(!o.status.success());
}

#[test]
fn config_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = blindssr(&[
        "scenario",
        "--config",
        &config_path(),
        "--reps",
        "2000",
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(
        text.contains("n_stage1=15 n_min=18 n_max=30 delta0=0.95 reps=2000"),
        "{text}"
    );
    let csv = std::fs::read_to_string(dir.path().join("scenario.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",2000,"));
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "master_seed = 1\nreplicates = 4\n").unwrap();
    let o = blindssr(&["exact", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn small_grid_writes_csv_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(
        &cfg,
        r#"
master_seed = 3
replications = 300
[grid]
n_stage1 = [10, 15]
n_min_ratios = [1, 1.5]
n_max_ratios = [2, "inf"]
delta0 = [0.5, 1.0]
"#,
    )
    .unwrap();
    let o = blindssr(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 16);
    let svg = std::fs::read_to_string(dir.path().join("heatmap.svg")).unwrap();
    assert_eq!(svg.matches("<title>").count(), 16);
}

#[test]
fn binned_and_peaks_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = blindssr(&["binned", "--reps", "5000", "--seed", "2", "--out", out]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("m=0 threshold=0.693022"));
    let o = blindssr(&[
        "peaks",
        "--n-stage1",
        "10",
        "--delta0-range",
        "1.0:1.3:0.1",
        "--reps",
        "3000",
        "--seed",
        "2",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("peaks.csv").exists());
    assert!(dir.path().join("peaks_n10.svg").exists());
}

#[test]
fn validate_passes() {
    let o = blindssr(&["validate", "--reps", "50000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
