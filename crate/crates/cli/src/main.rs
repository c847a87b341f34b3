use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qdsps::analysis::{
    build_correlation, efficiency_budget, fit_voigt, g2_from_histogram, ingest_tags, FitOptions, LorentzWidth, SidePeakWindow,
    TagFormat,
};
use qdsps::optics::read_spectrum_csv;
use qdsps::scenario::{
    run_scan, run_scenario, verify_paper, Instrument, PresetSettings, ScanConfig, ScenarioFile, VerifyOptions,
};

#[derive(Parser)]
#[command(name = "qdsps", version, about = "Quantum-dot single-photon source simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario, scan or fit configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Two-colour detuning/power scan of the swing-up resonance.
    Scan,
    /// Runs a scenario file with the instrument it names.
    Simulate,
    /// Runs a scenario with the HBT instrument.
    Hbt,
    /// Runs a scenario with the HOM instrument.
    Hom,
    /// Runs a scenario with the FPI instrument.
    Fpi,
    /// Fits one or two Voigt peaks to a spectrum CSV.
    Fit(FitArgs),
    /// End-to-end efficiency budget.
    Budget(BudgetArgs),
    /// Runs the reference operating points and prints a pass/fail table.
    VerifyPaper(VerifyArgs),
    /// Reads recorded time tags and correlates two channels.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Spectrum CSV with header `freq_ghz,counts`.
    #[arg(long)]
    spectrum: PathBuf,
    #[arg(long)]
    peaks: Option<usize>,
    /// Fixed Lorentzian line width; ignored with --free-lorentz.
    #[arg(long)]
    lorentz_ghz: Option<f64>,
    #[arg(long)]
    free_lorentz: bool,
    #[arg(long)]
    no_gaussian: bool,
    #[arg(long)]
    instrument_ghz: Option<f64>,
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    cr_raw_mhz: f64,
    #[arg(long, default_value_t = 0.768)]
    eta_det: f64,
    #[arg(long)]
    g2: f64,
    #[arg(long, default_value_t = 152.0)]
    rep_rate_mhz: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Preset ids to run (repeatable); all four by default.
    #[arg(long = "preset")]
    presets: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    trigger_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    etalon_scale: f64,
    /// Exit with status 2 when any row fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "binary9")]
    tag_format: String,
    #[arg(long, default_value_t = 0)]
    channel_a: u8,
    #[arg(long, default_value_t = 1)]
    channel_b: u8,
    #[arg(long, default_value_t = 50)]
    bin_width_ps: i64,
    /// Pulse period; enables the g²(0) estimate.
    #[arg(long)]
    period_ps: Option<f64>,
    /// Histogram half-span; defaults to 21 periods or 100 ns.
    #[arg(long)]
    span_ps: Option<i64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Scan => scan(c)?,
        Cmd::Simulate => simulate(c, None)?,
        Cmd::Hbt => simulate(c, Some(Instrument::Hbt))?,
        Cmd::Hom => simulate(c, Some(Instrument::Hom))?,
        Cmd::Fpi => simulate(c, Some(Instrument::Fpi))?,
        Cmd::Fit(a) => fit(c, a)?,
        Cmd::Budget(a) => budget(c, a)?,
        Cmd::VerifyPaper(a) => return verify(c, a),
        Cmd::Ingest(a) => ingest(c, a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn read_config(c: &Common) -> Result<Option<String>> {
    c.config.as_ref().map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))).transpose()
}

fn out_dir(c: &Common) -> Result<Option<&Path>> {
    if let Some(d) = &c.out {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(c.out.as_deref())
}

/// Prints a flat JSON object, or `key,value` rows for CSV.
fn emit(c: &Common, v: &Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match c.format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(v)?)?,
        Format::Csv => {
            writeln!(stdout, "key,value")?;
            if let Value::Object(m) = v {
                for (k, v) in m {
                    match v {
                        Value::Array(_) | Value::Object(_) => writeln!(stdout, "{k},\"{}\"", v.to_string().replace('"', "\"\""))?,
                        Value::Null => writeln!(stdout, "{k},")?,
                        other => writeln!(stdout, "{k},{other}")?,
                    }
                }
            }
        }
    }
    Ok(())
}

fn scan(c: &Common) -> Result<()> {
    let cfg = match read_config(c)? {
        Some(t) => ScanConfig::from_toml(&t)?,
        None => ScanConfig::paper(),
    };
    let outcome = run_scan(&cfg)?;
    if let Some(dir) = out_dir(c)? {
        fs::write(dir.join("scan.csv"), &outcome.csv)?;
        fs::write(dir.join("scan_summary.json"), serde_json::to_string_pretty(&outcome.summary)? + "\n")?;
    }
    emit(c, &serde_json::to_value(&outcome.summary)?)
}

fn simulate(c: &Common, instrument: Option<Instrument>) -> Result<()> {
    let Some(text) = read_config(c)? else {
        bail!("--config <scenario.toml> is required");
    };
    let mut file = ScenarioFile::from_toml(&text)?;
    if let Some(i) = instrument {
        file.instrument = i;
    }
    if let Some(s) = c.seed {
        file.seed = s;
    }
    let report_name = file.outputs.report.clone();
    let scenario = file.validate()?;
    let out = run_scenario(&scenario)?;
    if let Some(dir) = out_dir(c)? {
        out.write_to(dir, &report_name)?;
    }
    let mut v = serde_json::to_value(&out.report)?;
    v["preparation_probability"] = json!(out.preparation_probability);
    emit(c, &v)
}

fn fit(c: &Common, a: &FitArgs) -> Result<()> {
    let mut opts = match read_config(c)? {
        Some(t) => toml::from_str::<FitOptions>(&t).context("parsing fit options")?,
        None => FitOptions::default(),
    };
    if let Some(n) = a.peaks {
        opts.n_peaks = n;
    }
    if a.free_lorentz {
        opts.lorentz = LorentzWidth::Free;
    } else if let Some(l) = a.lorentz_ghz {
        opts.lorentz = LorentzWidth::Fixed(l);
    }
    if a.no_gaussian {
        opts.gaussian = false;
    }
    if let Some(i) = a.instrument_ghz {
        opts.instrument_fwhm_ghz = i;
    }
    opts.baseline |= a.baseline;
    let file = fs::File::open(&a.spectrum).with_context(|| format!("opening {}", a.spectrum.display()))?;
    let spectrum = read_spectrum_csv(file)?;
    let r = fit_voigt(&spectrum, &opts)?;
    let v = serde_json::to_value(&r)?;
    if let Some(dir) = out_dir(c)? {
        fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&v)? + "\n")?;
    }
    emit(c, &v)
}

fn budget(c: &Common, a: &BudgetArgs) -> Result<()> {
    let b = efficiency_budget(a.cr_raw_mhz, a.eta_det, a.g2, a.rep_rate_mhz)?;
    emit(c, &serde_json::to_value(b)?)
}

fn verify(c: &Common, a: &VerifyArgs) -> Result<ExitCode> {
    let mut settings = PresetSettings { trigger_scale: a.trigger_scale, etalon_scale: a.etalon_scale, ..Default::default() };
    if let Some(s) = c.seed {
        settings.seed = s;
    }
    let report = verify_paper(&VerifyOptions { presets: a.presets.clone(), settings })?;
    let md = report.to_markdown();
    if let Some(dir) = out_dir(c)? {
        fs::write(dir.join("verify.md"), &md)?;
        fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    print!("{md}");
    Ok(if a.strict && !report.all_pass() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn ingest(c: &Common, a: &IngestArgs) -> Result<()> {
    let format: TagFormat = a.tag_format.parse()?;
    let streams = ingest_tags(&a.input, format)?;
    let (ta, tb) = (streams.channel(a.channel_a), streams.channel(a.channel_b));
    let window = SidePeakWindow::default();
    let span = match (a.span_ps, a.period_ps) {
        (Some(s), _) => s,
        (None, Some(p)) => ((window.max_order + 1) as f64 * p).ceil() as i64,
        (None, None) => 100_000,
    };
    let (lo, hi) = streams
        .channels
        .values()
        .filter_map(|v| Some((*v.first()?, *v.last()?)))
        .fold((i64::MAX, i64::MIN), |(l, h), (a, b)| (l.min(a), h.max(b)));
    let duration = if hi >= lo { (hi - lo) as f64 } else { 0.0 };
    let h = build_correlation(ta, tb, a.bin_width_ps, span, (a.channel_a, a.channel_b), duration)?;
    if let Some(dir) = out_dir(c)? {
        let mut b = Vec::new();
        h.write_csv(&mut b)?;
        fs::write(dir.join("correlation.csv"), b)?;
    }
    let mut v = json!({
        "tags": streams.total(),
        "malformed": streams.malformed,
        "singles_a": ta.len(),
        "singles_b": tb.len(),
        "coincidences": h.total(),
        "g2_zero": null,
        "g2_err": null,
    });
    if let Some(p) = a.period_ps {
        let g = g2_from_histogram(&h, p, None, &window)?;
        v["g2_zero"] = json!(g.g2_zero);
        v["g2_err"] = json!(g.g2_err);
    }
    emit(c, &v)
}
