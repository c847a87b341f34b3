use std::path::Path;

use qdsps::analysis::read_histogram_csv;
use qdsps::optics::{decode_binary9, decode_csv, encode_binary9, encode_csv, read_spectrum_csv, write_spectrum_csv};
use qdsps::scenario::{
    run_scan, run_scenario, verify_paper, Linspace, PresetSettings, ScanConfig, ScenarioFile, ScenarioOutput, VerifyOptions,
};
use qdsps::stream::{read_stream_csv, write_stream_csv};
use qdsps::Error;

fn scenario_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios"))
}

fn load(name: &str) -> ScenarioFile {
    let text = std::fs::read_to_string(scenario_dir().join(name)).unwrap();
    ScenarioFile::from_toml(&text).unwrap()
}

fn run(file: ScenarioFile) -> ScenarioOutput {
    run_scenario(&file.validate().unwrap()).unwrap()
}

fn config_path(e: Error) -> String {
    match e {
        Error::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

const SMALL_HBT: &str = r#"
name = "small"
instrument = "hbt"
seed = 5
n_triggers = 200000

[excitation]
preparation_probability = 0.8

[noise]
preset = "super"

[outputs]
stream = true
tags = "csv"
"#;

#[test]
fn zero_triggers_is_rejected() {
    let mut f = ScenarioFile::from_toml(SMALL_HBT).unwrap();
    f.n_triggers = 0;
    assert_eq!(config_path(f.validate().unwrap_err()), "n_triggers");
}

#[test]
fn parse_errors_name_the_key() {
    let unknown = format!("{SMALL_HBT}\n[chain]\nbogus = 1\n");
    assert_eq!(config_path(ScenarioFile::from_toml(&unknown).unwrap_err()), "chain.bogus");
    let bad = SMALL_HBT.replace("preset = \"super\"", "preset = \"super\"\nsd_sigma_ghz = \"wide\"");
    assert_eq!(config_path(ScenarioFile::from_toml(&bad).unwrap_err()), "noise.sd_sigma_ghz");
    let bad_scan = "rep_rate_mhz = 76.0\n[pulse1]\ndetuning_nm = \"four\"\n";
    assert_eq!(config_path(ScanConfig::from_toml(bad_scan).unwrap_err()), "pulse1.detuning_nm");
}

#[test]
fn toml_round_trip_preserves_the_scenario() {
    for name in ["super_hbt.toml", "la_filtered_hom.toml", "custom_noise_hbt.toml", "super_fpi.toml"] {
        let f = load(name);
        assert_eq!(ScenarioFile::from_toml(&f.to_toml()).unwrap(), f, "{name}");
    }
}

#[test]
fn shipped_scenarios_validate() {
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if path.file_name().unwrap() == "scan.toml" {
            ScanConfig::from_toml(&text).unwrap().validate().unwrap();
        } else {
            ScenarioFile::from_toml(&text).unwrap().validate().unwrap();
        }
    }
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = run(ScenarioFile::from_toml(SMALL_HBT).unwrap());
    let b = run(ScenarioFile::from_toml(SMALL_HBT).unwrap());
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.artifacts, b.artifacts);
    let mut other = ScenarioFile::from_toml(SMALL_HBT).unwrap();
    other.seed = 6;
    assert_ne!(run(other).artifacts, a.artifacts);
}

#[test]
fn csv_artifacts_parse_back_losslessly() {
    let mut artifacts = run(ScenarioFile::from_toml(SMALL_HBT).unwrap()).artifacts;
    let mut fpi = load("super_fpi.toml");
    fpi.n_triggers = 200_000;
    artifacts.extend(run(fpi).artifacts);
    let mut hom = load("la_filtered_hom.toml");
    hom.n_triggers = 200_000;
    hom.outputs.tags = Some(qdsps::analysis::TagFormat::Binary9);
    artifacts.extend(run(hom).artifacts);

    let mut seen = Vec::new();
    for a in &artifacts {
        let b = a.bytes.as_slice();
        let mut again = Vec::new();
        match a.file_name.as_str() {
            "stream.csv" => write_stream_csv(&read_stream_csv(b).unwrap(), &mut again).unwrap(),
            "spectrum.csv" => write_spectrum_csv(&read_spectrum_csv(b).unwrap(), &mut again).unwrap(),
            "g2_histogram.csv" | "hom_parallel.csv" | "hom_orthogonal.csv" => {
                again.extend_from_slice(b"tau_ps,counts\n");
                for (t, c) in read_histogram_csv(b).unwrap() {
                    again.extend_from_slice(format!("{t},{c}\n").as_bytes());
                }
            }
            "tags.csv" => {
                let d = decode_csv(b).unwrap();
                assert_eq!(d.malformed, 0);
                encode_csv(&d.tags, &mut again).unwrap();
            }
            n if n.ends_with(".bin") => {
                let d = decode_binary9(b).unwrap();
                assert_eq!(d.malformed, 0);
                encode_binary9(&d.tags, &mut again).unwrap();
            }
            other => panic!("unexpected artifact {other}"),
        }
        assert_eq!(again, a.bytes, "{}", a.file_name);
        if a.file_name.ends_with(".csv") {
            assert!(!a.bytes.is_empty() && !a.bytes[0].is_ascii_digit(), "{} lacks a header", a.file_name);
        }
        seen.push(a.file_name.clone());
    }
    for name in ["stream.csv", "tags.csv", "g2_histogram.csv", "spectrum.csv", "hom_parallel.csv", "hom_parallel_tags.bin"] {
        assert!(seen.iter().any(|s| s == name), "missing {name}");
    }
}

#[test]
fn la_filtered_hom_scenario_lands_in_its_window() {
    let hom = run(load("la_filtered_hom.toml"));
    let v = hom.report.v_tpi.unwrap();
    assert!((0.60..=0.72).contains(&v), "V = {v}");
    let mut hbt = load("la_filtered_hom.toml");
    hbt.instrument = qdsps::scenario::Instrument::Hbt;
    let g2 = run(hbt).report.g2_zero.unwrap();
    assert!((0.004..=0.05).contains(&g2), "g2 = {g2}");
}

#[test]
fn single_cell_scan_at_the_operating_point() {
    let mut cfg = ScanConfig::paper();
    cfg.detuning_nm = Linspace { start: 10.8, stop: 10.8, n: 1 };
    cfg.power_nw = Linspace { start: 700.0, stop: 700.0, n: 1 };
    let out = run_scan(&cfg).unwrap();
    assert!(out.summary.max_occupation > 0.5, "{}", out.summary.max_occupation);
}

#[test]
fn ridge_is_absent_when_the_axis_excludes_the_band() {
    let mut cfg = ScanConfig::paper();
    cfg.detuning_nm = Linspace { start: 6.0, stop: 9.0, n: 13 };
    let out = run_scan(&cfg).unwrap();
    assert!(!out.summary.ridge_in_band);
}

#[test]
fn reference_grid_has_its_ridge_in_band() {
    let out = run_scan(&ScanConfig::paper()).unwrap();
    assert!(out.summary.ridge_in_band, "{:?}", out.summary);
    assert_eq!(out.summary.invalid_cells, 0);
}

#[test]
fn unknown_preset_is_a_config_error() {
    let opts = VerifyOptions { presets: vec!["nope".into()], ..Default::default() };
    assert!(matches!(verify_paper(&opts), Err(Error::Config { .. })));
}

#[test]
fn widened_etalon_fails_the_filtered_width_rows() {
    let opts = VerifyOptions {
        presets: vec!["super_filtered".into(), "la_filtered".into()],
        settings: PresetSettings { etalon_scale: 3.0, ..Default::default() },
    };
    let report = verify_paper(&opts).unwrap();
    for preset in ["super_filtered", "la_filtered"] {
        let row = report.row(preset, "fwhm_ghz").unwrap();
        assert!(!row.pass, "{row:?}");
    }
    assert!(!report.all_pass());
}
