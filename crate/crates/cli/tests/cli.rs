use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qdsps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdsps")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const SMALL_HBT: &str = r#"
name = "small"
instrument = "hbt"
seed = 3
n_triggers = 200000

[excitation]
preparation_probability = 0.9

[noise]
preset = "super"

[outputs]
tags = "binary9"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn budget_prints_json_and_csv() {
    let v = json(&qdsps(&["budget", "--cr-raw-mhz", "6.5", "--g2", "0.076"]));
    assert!((v["cr_end_mhz"].as_f64().unwrap() - 8.14).abs() < 0.0814);
    let out = qdsps(&["budget", "--cr-raw-mhz", "6.5", "--g2", "0.076", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l.starts_with("cr_end_mhz,")));
}

#[test]
fn config_errors_exit_nonzero_with_the_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{SMALL_HBT}\n[chain]\nbogus = 1\n"));
    let out = qdsps(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chain.bogus"));

    let out = qdsps(&["verify-paper", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("presets"));
}

#[test]
fn simulated_tags_ingest_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hbt.toml", SMALL_HBT);
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    let report = json(&qdsps(&["simulate", "--config", &cfg, "--out", out]));
    assert!(report["g2_zero"].as_f64().unwrap() < 0.2);
    let tags = out_dir.join("tags.bin");
    let n_tags = std::fs::metadata(&tags).unwrap().len() / 9;
    let period = format!("{}", 1e6 / 152.0);
    let v = json(&qdsps(&["ingest", "--input", tags.to_str().unwrap(), "--period-ps", &period, "--out", out]));
    assert_eq!(v["tags"].as_u64().unwrap(), n_tags);
    assert_eq!(v["malformed"].as_u64().unwrap(), 0);
    assert!(v["g2_zero"].as_f64().unwrap() < 0.2);
    assert!(out_dir.join("correlation.csv").exists());
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hbt.toml", SMALL_HBT);
    let a = qdsps(&["hbt", "--config", &cfg, "--seed", "9"]);
    let b = qdsps(&["hbt", "--config", &cfg, "--seed", "9"]);
    let c = qdsps(&["hbt", "--config", &cfg]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn fit_reads_a_simulated_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/super_fpi.toml")).unwrap();
    let cfg = write(dir.path(), "fpi.toml", &scenario.replace("n_triggers = 1000000", "n_triggers = 300000"));
    let out = dir.path().to_str().unwrap();
    json(&qdsps(&["fpi", "--config", &cfg, "--out", out]));
    let spectrum = dir.path().join("spectrum.csv");
    let v = json(&qdsps(&["fit", "--spectrum", spectrum.to_str().unwrap(), "--peaks", "2", "--out", out]));
    let s = v["splitting_ghz"].as_f64().unwrap();
    assert!((s - 6.19).abs() < 0.5, "splitting {s}");
    assert!(dir.path().join("fit.json").exists());
}
