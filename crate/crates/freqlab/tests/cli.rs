//! Exit-code and artifact contract of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn freqlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqlab"))
}

#[test]
fn oracle_sigma_reference_value() {
    let out = freqlab()
        .args(["oracle", "--curve", "sigma", "--h", "3", "--dl", "2", "--alpha", "0.5", "--b", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.316228");
}

#[test]
fn oracle_var_t_max_zero_single_row() {
    let out = freqlab()
        .args(["oracle", "--curve", "var", "--h", "3", "--dl", "2", "--alpha", "0.5", "--b", "1", "--t-max", "0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,value");
    assert!(lines[1].starts_with("0.000000000e0,0.000000000e0"));
}

#[test]
fn oracle_var0_with_damping_is_validation_error() {
    let out = freqlab()
        .args(["oracle", "--curve", "var0", "--h", "3", "--dl", "0.1", "--alpha", "0.5", "--b", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("D_L"));
}

#[test]
fn simulate_missing_scenario_is_validation_error() {
    let out = freqlab()
        .args(["simulate", "--scenario", "missing.cfg", "--out-dir", "/tmp/freqlab-none"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = freqlab()
            .args([
                "simulate",
                "--scenario",
                "b",
                "--seed",
                "42",
                "--duration-override",
                "3600",
                "--out-dir",
            ])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let first = run("one");
    let second = run("two");
    for name in ["samples.csv", "histogram.csv", "modality.txt", "report.txt"] {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let samples = fs::read_to_string(first.join("samples.csv")).unwrap();
    assert!(samples.starts_with("t,value_pu\n"));
}

#[test]
fn simulate_divergent_scenario_exits_3() {
    // a noise intensity far past any physical value blows through the
    // 0.1 pu divergence guard within the first steps
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
label = "blowup"
duration_s = 3600.0
dt_s = 0.01
warmup_s = 600.0
seed = 1
d_l_pu = 2.0
d_za_mhz = 36.0
inertia_multiplier = 1.0
cadence_s = 1.0
n_bins = 101

[stochastic_load]
p_l0_mw = 1.0
alpha_per_s = 0.5
b_per_sqrt_s = 1e9
mu_per_s = 0.0
eta0 = 0.0
"#;
    let path = dir.path().join("blowup.toml");
    fs::write(&path, toml).unwrap();
    let out = freqlab()
        .args(["simulate", "--scenario"])
        .arg(&path)
        .args(["--out-dir"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

fn write_csv(path: &Path, rows: &[String]) {
    let mut text = String::from("timestamp,frequency_hz\n");
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn analyze_constant_file_unimodal_zero_exceedance() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    let rows: Vec<String> = (0..3600).map(|t| format!("{t},60.000")).collect();
    write_csv(&input, &rows);
    let out_dir = dir.path().join("an");
    let out = freqlab()
        .args(["analyze", "--input"])
        .arg(&input)
        .args(["--window", "full", "--d-za-mhz", "36", "--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verdicts = fs::read_to_string(out_dir.join("verdicts.txt")).unwrap();
    for line in verdicts.trim().lines() {
        assert!(line.ends_with("=unimodal"), "unexpected verdict line: {line}");
    }
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("fraction_outside_deadband=0.000000000"));
}

#[test]
fn analyze_header_only_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "timestamp,frequency_hz\n").unwrap();
    let out = freqlab()
        .args(["analyze", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(dir.path().join("an"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_majority_bad_rows_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    let mut rows: Vec<String> = (0..10).map(|t| format!("{t},60.0")).collect();
    rows.extend((0..20).map(|k| format!("garbage line {k}")));
    write_csv(&input, &rows);
    let out = freqlab()
        .args(["analyze", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(dir.path().join("an"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unusable"));
}

#[test]
fn analyze_hourly_windows_with_gap_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gap.csv");
    let mut rows: Vec<String> = (0..4000).map(|t| format!("{t},60.001")).collect();
    rows.extend((5000..8600).map(|t| format!("{t},59.999")));
    write_csv(&input, &rows);
    let out_dir = dir.path().join("an");
    let out = freqlab()
        .args(["analyze", "--input"])
        .arg(&input)
        .args(["--window", "hourly", "--out-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("gap_count=1"));
    assert!(summary.contains("gap=3999..5000"));
    assert!(out_dir.join("window_000.csv").exists());
    assert!(out_dir.join("combined.csv").exists());
    assert!(out_dir.join("drift.csv").exists());
}
