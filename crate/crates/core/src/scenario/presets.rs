use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    AnalysisSection, ChainSection, DriveSection, ExcitationSection, FitSection, FpiSection, Instrument, NoiseSection,
    OutputSection, PulseEntry, ScenarioFile,
};
use super::run::{run_scenario, Report};
use crate::analysis::efficiency_budget;
use crate::excitation::{EmitterParams, Envelope};
use crate::optics::{DetectorSpec, FilterSpec, HomConfig};
use crate::stream::NoisePreset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetId {
    SuperUnfiltered,
    LaUnfiltered,
    SuperFiltered,
    LaFiltered,
}

impl PresetId {
    pub const ALL: [PresetId; 4] =
        [PresetId::SuperUnfiltered, PresetId::LaUnfiltered, PresetId::SuperFiltered, PresetId::LaFiltered];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetId::SuperUnfiltered => "super_unfiltered",
            PresetId::LaUnfiltered => "la_unfiltered",
            PresetId::SuperFiltered => "super_filtered",
            PresetId::LaFiltered => "la_filtered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config("presets", format!("unknown preset id `{s}`")))
    }

    fn noise(&self) -> NoisePreset {
        match self {
            PresetId::SuperUnfiltered | PresetId::SuperFiltered => NoisePreset::Super,
            PresetId::LaUnfiltered | PresetId::LaFiltered => NoisePreset::La,
        }
    }

    fn filtered(&self) -> bool {
        matches!(self, PresetId::SuperFiltered | PresetId::LaFiltered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    G2Zero,
    VTpi,
    FwhmGhz,
    SplittingGhz,
    AreaRatio,
    CrEndMhz,
    EtaEnd,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::G2Zero => "g2_zero",
            Metric::VTpi => "v_tpi",
            Metric::FwhmGhz => "fwhm_ghz",
            Metric::SplittingGhz => "splitting_ghz",
            Metric::AreaRatio => "area_ratio",
            Metric::CrEndMhz => "cr_end_mhz",
            Metric::EtaEnd => "eta_end",
        }
    }

    pub fn of(&self, r: &Report) -> Option<f64> {
        match self {
            Metric::G2Zero => r.g2_zero,
            Metric::VTpi => r.v_tpi,
            Metric::FwhmGhz => r.fwhm_ghz,
            Metric::SplittingGhz => r.splitting_ghz,
            Metric::AreaRatio => r.area_ratio,
            Metric::CrEndMhz => r.cr_end_mhz,
            Metric::EtaEnd => r.eta_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub metric: Metric,
    pub value: f64,
    pub tolerance: f64,
}

const fn exp(metric: Metric, value: f64, tolerance: f64) -> Expectation {
    Expectation { metric, value, tolerance }
}

/// Settings shared by the preset scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetSettings {
    pub seed: u64,
    /// Multiplies every trigger count.
    pub trigger_scale: f64,
    /// Multiplies the etalon width (negative control).
    pub etalon_scale: f64,
}

impl Default for PresetSettings {
    fn default() -> Self {
        Self { seed: 20_240_601, trigger_scale: 1.0, etalon_scale: 1.0 }
    }
}

/// Triggers per statistics run.
pub const PRESET_TRIGGERS: u64 = 2_000_000;

/// Preset runs collect every photon, so the detectors run without dead time
/// to stay out of saturation.
pub const PRESET_DETECTOR: DetectorSpec =
    DetectorSpec { efficiency: 0.768, dark_count_rate_hz: 100.0, timing_jitter_fwhm_ps: 50.0, dead_time_ns: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct PaperPreset {
    pub id: PresetId,
    pub expected: Vec<Expectation>,
}

impl PaperPreset {
    pub fn new(id: PresetId) -> Self {
        use Metric::*;
        let expected = match id {
            PresetId::SuperUnfiltered => vec![
                exp(G2Zero, 0.076, 0.01),
                exp(VTpi, 0.104, 0.03),
                exp(SplittingGhz, 6.19, 0.2),
                exp(AreaRatio, 0.39, 0.05),
                exp(FwhmGhz, 4.94, 0.2),
            ],
            PresetId::LaUnfiltered => vec![exp(G2Zero, 0.069, 0.01), exp(VTpi, 0.349, 0.03), exp(FwhmGhz, 4.83, 0.2)],
            PresetId::SuperFiltered => vec![exp(G2Zero, 0.026, 0.01), exp(VTpi, 0.508, 0.04), exp(FwhmGhz, 0.79, 0.05)],
            PresetId::LaFiltered => vec![exp(G2Zero, 0.014, 0.008), exp(VTpi, 0.664, 0.03), exp(FwhmGhz, 0.80, 0.05)],
        };
        Self { id, expected }
    }

    /// One scenario per instrument (HBT, HOM, FPI).
    pub fn scenarios(&self, settings: &PresetSettings) -> Vec<ScenarioFile> {
        let id = self.id;
        let (pulses, excitation) = match id.noise() {
            NoisePreset::Super => (
                vec![pulse(4.0, 350.0), pulse(10.8, 700.0)],
                ExcitationSection { pulse_rate_mhz: Some(76.0), ..Default::default() },
            ),
            NoisePreset::La => (vec![pulse(-2.0, 700.0)], ExcitationSection::default()),
        };
        let filters = if id.filtered() {
            vec![FilterSpec::etalon(0.0, FilterSpec::DEFAULT_ETALON_FWHM_GHZ * settings.etalon_scale)]
        } else {
            vec![]
        };
        let scaled = |n: u64| ((n as f64 * settings.trigger_scale).round() as u64).max(1);
        let fpi = if id.filtered() {
            FpiSection {
                start_ghz: -2.0,
                stop_ghz: 2.0,
                n_bins: 160,
                fit: FitSection { n_peaks: 1, lorentz_fwhm_ghz: None, gaussian: false, baseline: false },
                ..Default::default()
            }
        } else {
            FpiSection {
                fit: FitSection { n_peaks: if id.noise() == NoisePreset::Super { 2 } else { 1 }, ..Default::default() },
                ..Default::default()
            }
        };
        [(Instrument::Hbt, 1u64), (Instrument::Hom, 2), (Instrument::Fpi, 3)]
            .into_iter()
            .map(|(instrument, salt)| ScenarioFile {
                name: format!("{}_{}", id.as_str(), instrument.as_str()),
                instrument,
                seed: settings.seed.wrapping_mul(31).wrapping_add(salt + 10 * id as u64),
                n_triggers: scaled(PRESET_TRIGGERS),
                emitter: EmitterParams::default(),
                excitation: excitation.clone(),
                pulses: pulses.clone(),
                drive: DriveSection::default(),
                noise: NoiseSection::from_preset(id.noise()),
                chain: ChainSection { filters: filters.clone(), ..Default::default() },
                detectors: vec![PRESET_DETECTOR; 2],
                hom: HomConfig::default(),
                fpi: fpi.clone(),
                analysis: AnalysisSection::default(),
                outputs: OutputSection::default(),
            })
            .collect()
    }

    /// Runs all instruments and merges their reports.
    pub fn run(&self, settings: &PresetSettings) -> Result<Report> {
        let reports = self
            .scenarios(settings)
            .into_iter()
            .map(|f| f.validate().and_then(|s| run_scenario(&s)).map(|o| o.report))
            .collect::<Result<Vec<_>>>()?;
        let mut merged = Report::default();
        for r in &reports {
            merged.merge(r);
        }
        Ok(merged)
    }
}

fn pulse(detuning_nm: f64, power_nw: f64) -> PulseEntry {
    PulseEntry {
        detuning_nm,
        power_nw: Some(power_nw),
        area_rad: None,
        duration_ps: crate::excitation::DEFAULT_PULSE_FWHM_PS,
        envelope: Envelope::Gaussian,
    }
}

/// Published operating points for the rate budget:
/// (label, CR_raw MHz, g²(0), CR_end MHz, η_end).
pub const BUDGET_POINTS: [(&str, f64, f64, f64, f64); 4] = [
    ("budget_super_unfiltered", 6.50, 0.076, 8.14, 0.0536),
    ("budget_la_unfiltered", 7.36, 0.069, 9.25, 0.0609),
    ("budget_super_filtered", 0.58, 0.026, 0.75, 0.0049),
    ("budget_la_filtered", 1.12, 0.014, 1.45, 0.0095),
];
pub const BUDGET_DETECTION_EFFICIENCY: f64 = 0.768;
pub const BUDGET_REP_RATE_MHZ: f64 = 152.0;
/// Relative tolerance of the budget rows.
pub const BUDGET_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub preset: String,
    pub metric: String,
    pub value: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, preset: &str, metric: &str) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.preset == preset && r.metric == metric)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| preset | metric | value | expected | tolerance | result |\n|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let v = r.value.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | ±{:.4} | {} |",
                r.preset,
                r.metric,
                v,
                r.expected,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyOptions {
    /// Preset ids to run; empty runs all four.
    pub presets: Vec<String>,
    pub settings: PresetSettings,
}

/// Runs the selected presets with fixed seeds and compares every figure of
/// merit with its expected value, followed by the rate-budget rows.
pub fn verify_paper(opts: &VerifyOptions) -> Result<VerifyReport> {
    let ids: Vec<PresetId> = if opts.presets.is_empty() {
        PresetId::ALL.to_vec()
    } else {
        opts.presets.iter().map(|s| PresetId::parse(s)).collect::<Result<_>>()?
    };
    let results: Vec<(PaperPreset, std::result::Result<Report, String>)> = ids
        .par_iter()
        .map(|&id| {
            let p = PaperPreset::new(id);
            let r = p.run(&opts.settings).map_err(|e| e.to_string());
            (p, r)
        })
        .collect();
    let mut rows = Vec::new();
    for (p, r) in results {
        if let Err(e) = &r {
            log::error!("preset {} failed: {e}", p.id.as_str());
        }
        for e in &p.expected {
            let value = r.as_ref().ok().and_then(|rep| e.metric.of(rep));
            rows.push(VerifyRow {
                preset: p.id.as_str().into(),
                metric: e.metric.as_str().into(),
                value,
                expected: e.value,
                tolerance: e.tolerance,
                pass: value.is_some_and(|v| (v - e.value).abs() <= e.tolerance),
            });
        }
    }
    for (label, cr_raw, g2, cr_end, eta_end) in BUDGET_POINTS {
        let b = efficiency_budget(cr_raw, BUDGET_DETECTION_EFFICIENCY, g2, BUDGET_REP_RATE_MHZ).ok();
        for (metric, value, expected) in
            [(Metric::CrEndMhz, b.map(|b| b.cr_end_mhz), cr_end), (Metric::EtaEnd, b.map(|b| b.eta_end), eta_end)]
        {
            let tol = BUDGET_TOLERANCE * expected;
            rows.push(VerifyRow {
                preset: label.into(),
                metric: metric.as_str().into(),
                value,
                expected,
                tolerance: tol,
                pass: value.is_some_and(|v| (v - expected).abs() <= tol),
            });
        }
    }
    Ok(VerifyReport { rows })
}
