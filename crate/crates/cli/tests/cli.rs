use std::fs;
use std::process::{Command, Output};

fn cbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn header_value(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in header"))
        .parse()
        .unwrap()
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn unknown_key_exits_with_config_error() {
    let o = cbs(&["spectrum", "--rabi", "1", "--set", "rabbi=2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rabbi"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "rabi = 1\ndetunning = 3\n").unwrap();
    let o = cbs(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flags_and_missing_inputs_exit_one() {
    assert_eq!(cbs(&["spectrum", "--rabi", "fast"]).status.code(), Some(1));
    assert_eq!(cbs(&["spectrum"]).status.code(), Some(1));
    assert_eq!(cbs(&["no-such-mode"]).status.code(), Some(1));
    assert_eq!(cbs(&["--help"]).status.code(), Some(0));
}

#[test]
fn truncated_grid_violates_sum_rule() {
    let o = cbs(&["spectrum", "--rabi", "5", "--nu-min", "-1", "--nu-max", "1", "--points", "21"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum rule"));
}

#[test]
fn runs_are_byte_identical() {
    let args = ["cone", "--rabi", "5", "--set", "monte_carlo=true", "--set", "samples=20000", "--seed", "7"];
    let a = cbs(&args);
    let b = cbs(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = cbs(&["cone", "--rabi", "5", "--set", "monte_carlo=true", "--set", "samples=20000", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn header_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let o = cbs(&[
        "spectrum", "--rabi", "3", "--detuning", "-2", "--points", "401", "--normalize",
        "--output", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cbs(&[
        "spectrum", "--from-header", first.to_str().unwrap(), "--output", second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let strip = |p: &std::path::Path| {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# output = "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn json_header_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("sweep.json");
    let o = cbs(&[
        "intensity-sweep", "--set", "rabi_points=4", "--set", "detunings=0,3",
        "--format", "json", "--output", json.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 8);
    let o = cbs(&["intensity-sweep", "--from-header", json.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o)).len(), 8);
}

#[test]
fn compare_oracles_agrees() {
    let o = cbs(&["compare-oracles", "--set", "saturations=0.01,0.5,3,50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(header_value(&text, "result.max_rel_err") < 1e-10);
    assert_eq!(rows(&text).len(), 4);
}

#[test]
fn weak_drive_spectrum_peaks_at_laser_frequency() {
    let o = cbs(&["spectrum", "--rabi", "0.1", "--points", "801"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    let peak = r.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!(peak[0].abs() < 0.05, "ladder peak at {}", peak[0]);
}

#[test]
fn detuned_strong_drive_crossed_integral_is_negative() {
    let o = cbs(&["spectrum", "--rabi", "20", "--detuning", "20", "--normalize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!((header_value(&text, "result.l_inel") - 1.0).abs() < 1e-12);
    let c = header_value(&text, "result.c_inel");
    assert!((c + 0.066).abs() < 0.002, "normalized crossed intensity {c}");
}

#[test]
fn averaged_units_scale_unit_results() {
    let unit = stdout(&cbs(&["spectrum", "--rabi", "2"]));
    let avg = stdout(&cbs(&["spectrum", "--rabi", "2", "--set", "units=averaged", "--set", "mean_separation=50"]));
    let ratio = header_value(&avg, "result.l_inel") / header_value(&unit, "result.l_inel");
    let expected = 2.0 / 15.0 * (1.5f64 / 50.0).powi(2);
    assert!((ratio / expected - 1.0).abs() < 1e-12, "{ratio} vs {expected}");
}
