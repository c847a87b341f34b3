//! Scenario files (TOML) and their validated form.

use serde::{Deserialize, Serialize};

use crate::analysis::{FitOptions, LorentzWidth, SidePeakWindow, TagFormat};
use crate::excitation::{
    preparation_probability, DriveConfig, EmitterParams, Envelope, PhononModel, PowerCalibration, PulseSpec, PulseStrength,
    SolverSettings, DEFAULT_PULSE_FWHM_PS,
};
use crate::optics::{DetectorSpec, FilterSpec, FpiSettings, HomConfig, ScanAxis};
use crate::stream::{NoiseModel, NoisePreset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Hbt,
    Hom,
    Fpi,
}

impl Instrument {
    pub fn as_str(&self) -> &'static str {
        match self {
            Instrument::Hbt => "hbt",
            Instrument::Hom => "hom",
            Instrument::Fpi => "fpi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEntry {
    pub detuning_nm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_nw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_rad: Option<f64>,
    #[serde(default = "default_duration")]
    pub duration_ps: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

fn default_duration() -> f64 {
    DEFAULT_PULSE_FWHM_PS
}

impl PulseEntry {
    fn to_spec(&self, i: usize) -> Result<PulseSpec> {
        let strength = match (self.power_nw, self.area_rad) {
            (Some(p), None) => PulseStrength::PowerNw(p),
            (None, Some(a)) => PulseStrength::Area(a),
            _ => return Err(Error::config(format!("pulses[{i}]"), "give exactly one of power_nw or area_rad")),
        };
        Ok(PulseSpec { detuning_nm: self.detuning_nm, strength, duration_fwhm_ps: self.duration_ps, envelope: self.envelope })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub delay_ps: f64,
    /// Trigger (excitation) rate.
    pub rep_rate_mhz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self { delay_ps: 0.0, rep_rate_mhz: 152.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSection {
    /// Per-trigger preparation probability; replaces the pulse solve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preparation_probability: Option<f64>,
    /// Laser pulse rate for the power→area calibration, when it differs
    /// from the trigger rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_rate_mhz: Option<f64>,
    pub phonon_assisted: bool,
    /// Pulse area reached by `reference_power_nw` at `reference_rate_mhz`.
    pub reference_area_pi: f64,
    pub reference_power_nw: f64,
    pub reference_rate_mhz: f64,
    pub dt_ps: f64,
}

impl Default for ExcitationSection {
    fn default() -> Self {
        Self {
            preparation_probability: None,
            pulse_rate_mhz: None,
            phonon_assisted: true,
            reference_area_pi: 10.0,
            reference_power_nw: 350.0,
            reference_rate_mhz: 76.0,
            dt_ps: SolverSettings::default().dt_ps,
        }
    }
}

/// Noise preset plus optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub preset: NoiseChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_sigma_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_corr_time_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_splitting_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_area_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_rate_per_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blink_on_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blink_corr_time_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiphoton_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_linewidth_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dephasing_ceiling: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    Super,
    La,
    /// Noise-free base; set fields explicitly.
    #[default]
    Custom,
}

impl NoiseSection {
    pub fn from_preset(p: NoisePreset) -> Self {
        Self {
            preset: match p {
                NoisePreset::Super => NoiseChoice::Super,
                NoisePreset::La => NoiseChoice::La,
            },
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<NoiseModel> {
        let mut n = match self.preset {
            NoiseChoice::Super => NoiseModel::preset(NoisePreset::Super),
            NoiseChoice::La => NoiseModel::preset(NoisePreset::La),
            NoiseChoice::Custom => NoiseModel::quiet(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { n.$f = v; } )* };
        }
        over!(
            sd_sigma_ghz,
            sd_corr_time_ns,
            jump_splitting_ghz,
            jump_area_ratio,
            jump_rate_per_ns,
            blink_on_fraction,
            blink_corr_time_ns,
            multiphoton_prob,
            background_linewidth_ghz,
            dephasing_ceiling
        );
        n.validate()?;
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    /// Polarization-maintaining coupling (drops photons that fail the polarizer).
    pub polarizer: bool,
    /// Bernoulli loss between source and instrument.
    pub collection_efficiency: f64,
    pub filters: Vec<FilterSpec>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self { polarizer: true, collection_efficiency: 1.0, filters: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub n_peaks: usize,
    /// Omit for a free Lorentzian width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lorentz_fwhm_ghz: Option<f64>,
    pub gaussian: bool,
    pub baseline: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { n_peaks: 1, lorentz_fwhm_ghz: Some(0.32), gaussian: true, baseline: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpiSection {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub n_bins: usize,
    pub instrument_fwhm_ghz: f64,
    pub fit: FitSection,
}

impl Default for FpiSection {
    fn default() -> Self {
        Self {
            start_ghz: -20.0,
            stop_ghz: 26.0,
            n_bins: 460,
            instrument_fwhm_ghz: FpiSettings::DEFAULT_INSTRUMENT_FWHM_GHZ,
            fit: FitSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub bin_width_ps: i64,
    pub side_peaks: SidePeakWindow,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { bin_width_ps: 50, side_peaks: SidePeakWindow::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: String,
    pub histograms: bool,
    pub spectra: bool,
    pub stream: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<TagFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { report: "report.json".into(), histograms: true, spectra: true, stream: false, tags: None }
    }
}

/// Deserializes TOML, reporting failures at the dotted key path.
pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "<file>".to_string() } else { path };
        Error::config(path, e.into_inner().message().to_string())
    })
}

fn default_seed() -> u64 {
    1
}

fn default_triggers() -> u64 {
    2_000_000
}

/// A scenario file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub instrument: Instrument,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_triggers")]
    pub n_triggers: u64,
    #[serde(default)]
    pub emitter: EmitterParams,
    #[serde(default)]
    pub excitation: ExcitationSection,
    #[serde(default)]
    pub pulses: Vec<PulseEntry>,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub hom: HomConfig,
    #[serde(default)]
    pub fpi: FpiSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

/// How the per-trigger preparation probability is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    Direct(f64),
    Drive { drive: DriveConfig, phonon: Option<PhononModel>, settings: SolverSettings },
}

/// A validated, fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub excitation: Excitation,
    pub noise: NoiseModel,
    pub detectors: [DetectorSpec; 2],
    pub fit: FitOptions,
    pub axis: ScanAxis,
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(self) -> Result<Scenario> {
        if self.n_triggers == 0 {
            return Err(Error::config("n_triggers", "must be > 0"));
        }
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        self.emitter.validate()?;
        if !(self.drive.rep_rate_mhz > 0.0) {
            return Err(Error::config("drive.rep_rate_mhz", "must be > 0"));
        }
        let ex = &self.excitation;
        let excitation = match (ex.preparation_probability, self.pulses.is_empty()) {
            (Some(_), false) => {
                return Err(Error::config("excitation.preparation_probability", "conflicts with [[pulses]]; give one"))
            }
            (None, true) => return Err(Error::config("pulses", "need [[pulses]] or excitation.preparation_probability")),
            (Some(p), true) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config("excitation.preparation_probability", "must lie in [0, 1]"));
                }
                Excitation::Direct(p)
            }
            (None, false) => {
                let pulses = self.pulses.iter().enumerate().map(|(i, p)| p.to_spec(i)).collect::<Result<Vec<_>>>()?;
                if !(ex.reference_area_pi > 0.0 && ex.reference_power_nw > 0.0 && ex.reference_rate_mhz > 0.0) {
                    return Err(Error::config("excitation.reference_area_pi", "calibration reference must be positive"));
                }
                if !(ex.dt_ps > 0.0) {
                    return Err(Error::config("excitation.dt_ps", "must be > 0"));
                }
                let rate = ex.pulse_rate_mhz.unwrap_or(self.drive.rep_rate_mhz);
                let drive = DriveConfig {
                    pulses,
                    inter_pulse_delay_ps: self.drive.delay_ps,
                    repetition_rate_mhz: rate,
                    phonon_pump_rate: 0.0,
                    calibration: PowerCalibration::from_reference(
                        ex.reference_power_nw,
                        ex.reference_rate_mhz,
                        ex.reference_area_pi * std::f64::consts::PI,
                    ),
                };
                drive.validate()?;
                Excitation::Drive {
                    drive,
                    phonon: ex.phonon_assisted.then(PhononModel::default),
                    settings: SolverSettings { dt_ps: ex.dt_ps, ..Default::default() },
                }
            }
        };
        let noise = self.noise.resolve()?;
        if !(self.chain.collection_efficiency > 0.0 && self.chain.collection_efficiency <= 1.0) {
            return Err(Error::config("chain.collection_efficiency", "must lie in (0, 1]"));
        }
        for (i, f) in self.chain.filters.iter().enumerate() {
            f.validate(&format!("chain.filters[{i}]"))?;
        }
        let detectors = match self.detectors.len() {
            0 => [DetectorSpec::default(); 2],
            2 => [self.detectors[0], self.detectors[1]],
            _ => return Err(Error::config("detectors", "give zero or two detector entries")),
        };
        detectors[0].validate("detectors[0]")?;
        detectors[1].validate("detectors[1]")?;
        if self.instrument == Instrument::Hom {
            self.hom.validate(crate::units::rep_period_ps(self.drive.rep_rate_mhz))?;
        }
        let axis = ScanAxis { start_ghz: self.fpi.start_ghz, stop_ghz: self.fpi.stop_ghz, n_bins: self.fpi.n_bins };
        if self.instrument == Instrument::Fpi {
            axis.validate()?;
            if !(self.fpi.instrument_fwhm_ghz >= 0.0) {
                return Err(Error::config("fpi.instrument_fwhm_ghz", "must be >= 0"));
            }
            if !(self.fpi.fit.n_peaks == 1 || self.fpi.fit.n_peaks == 2) {
                return Err(Error::config("fpi.fit.n_peaks", "must be 1 or 2"));
            }
        }
        if self.analysis.bin_width_ps <= 0 {
            return Err(Error::config("analysis.bin_width_ps", "must be > 0"));
        }
        let sp = self.analysis.side_peaks;
        if sp.min_order == 0 || sp.max_order < sp.min_order {
            return Err(Error::config("analysis.side_peaks", "need 1 <= min_order <= max_order"));
        }
        if self.outputs.report.trim().is_empty() {
            return Err(Error::config("outputs.report", "must not be empty"));
        }
        let fit = FitOptions {
            n_peaks: self.fpi.fit.n_peaks,
            lorentz: self.fpi.fit.lorentz_fwhm_ghz.map(LorentzWidth::Fixed).unwrap_or(LorentzWidth::Free),
            gaussian: self.fpi.fit.gaussian,
            instrument_fwhm_ghz: self.fpi.instrument_fwhm_ghz,
            baseline: self.fpi.fit.baseline,
        };
        Ok(Scenario { file: self, excitation, noise, detectors, fit, axis })
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        ScenarioFile::from_toml(text)?.validate()
    }

    pub fn preparation_probability(&self) -> Result<f64> {
        match &self.excitation {
            Excitation::Direct(p) => Ok(*p),
            Excitation::Drive { drive, phonon, settings } => {
                let d = match phonon {
                    Some(m) => drive.clone().with_phonon_model(m),
                    None => drive.clone(),
                };
                Ok(preparation_probability(&self.file.emitter, &d, settings)?.total)
            }
        }
    }
}
