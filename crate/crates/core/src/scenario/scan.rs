use serde::{Deserialize, Serialize};

use crate::excitation::{
    scan_super, EmitterParams, PhononModel, PowerCalibration, PulseSpec, ScanAxes, ScanContext, ScanGrid, SolverSettings,
};
use crate::{Error, Result};

/// Evenly spaced axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Linspace {
    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanPulse {
    pub detuning_nm: f64,
    #[serde(default)]
    pub power_nw: f64,
    #[serde(default = "default_duration")]
    pub duration_ps: f64,
}

fn default_duration() -> f64 {
    crate::excitation::DEFAULT_PULSE_FWHM_PS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub emitter: EmitterParams,
    pub pulse1: ScanPulse,
    #[serde(default = "default_pulse2_duration")]
    pub pulse2_duration_ps: f64,
    pub detuning_nm: Linspace,
    pub power_nw: Linspace,
    #[serde(default = "default_rate")]
    pub rep_rate_mhz: f64,
    #[serde(default)]
    pub delay_ps: f64,
    #[serde(default = "yes")]
    pub phonon_assisted: bool,
    /// Band for the ridge check, in units of Δ₁.
    #[serde(default = "default_band")]
    pub ridge_band: [f64; 2],
    #[serde(default = "default_dt")]
    pub dt_ps: f64,
}

fn default_pulse2_duration() -> f64 {
    crate::excitation::DEFAULT_PULSE_FWHM_PS
}
fn default_rate() -> f64 {
    76.0
}
fn yes() -> bool {
    true
}
fn default_band() -> [f64; 2] {
    [2.5, 3.0]
}
fn default_dt() -> f64 {
    SolverSettings::default().dt_ps
}

/// Largest number of cells a scan may have.
pub const MAX_SCAN_CELLS: usize = 10_000;

impl ScanConfig {
    /// Δ₂ ∈ [1.5, 4]·Δ₁ and P₂ up to 4·P₁ around the reference operating point.
    pub fn paper() -> Self {
        Self {
            emitter: EmitterParams::default(),
            pulse1: ScanPulse { detuning_nm: 4.0, power_nw: 350.0, duration_ps: default_duration() },
            pulse2_duration_ps: default_duration(),
            detuning_nm: Linspace { start: 6.0, stop: 16.0, n: 41 },
            power_nw: Linspace { start: 100.0, stop: 1400.0, n: 14 },
            rep_rate_mhz: 76.0,
            delay_ps: 0.0,
            phonon_assisted: true,
            ridge_band: default_band(),
            dt_ps: default_dt(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        super::config::parse_toml(text)
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        let cells = self.detuning_nm.n.saturating_mul(self.power_nw.n);
        if cells == 0 {
            return Err(Error::config("detuning_nm.n", "axes must be nonempty"));
        }
        if cells > MAX_SCAN_CELLS {
            return Err(Error::config("power_nw.n", format!("{cells} cells exceed the limit of {MAX_SCAN_CELLS}")));
        }
        if !(self.rep_rate_mhz > 0.0) {
            return Err(Error::config("rep_rate_mhz", "must be > 0"));
        }
        if !(self.dt_ps > 0.0) {
            return Err(Error::config("dt_ps", "must be > 0"));
        }
        if !(self.ridge_band[0] <= self.ridge_band[1]) {
            return Err(Error::config("ridge_band", "lower bound exceeds upper bound"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub max_detuning_nm: f64,
    pub max_power_nw: f64,
    pub max_occupation: f64,
    /// Δ₂/Δ₁ at the maximum.
    pub max_ratio: f64,
    pub ridge_band: [f64; 2],
    /// Global maximum inside the band.
    pub ridge_in_band: bool,
    /// Power rows whose own maximum lies inside the band.
    pub rows_with_ridge_in_band: usize,
    pub invalid_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub grid: ScanGrid,
    pub summary: ScanSummary,
    pub csv: Vec<u8>,
}

/// Runs a swing-up scan and summarizes where the resonance ridge sits.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanOutcome> {
    cfg.validate()?;
    let axes = ScanAxes { detuning_nm: cfg.detuning_nm.values(), power_nw: cfg.power_nw.values() };
    let pulse1 = PulseSpec {
        duration_fwhm_ps: cfg.pulse1.duration_ps,
        ..PulseSpec::with_power(cfg.pulse1.detuning_nm, cfg.pulse1.power_nw)
    };
    let ctx = ScanContext {
        repetition_rate_mhz: cfg.rep_rate_mhz,
        calibration: PowerCalibration::default(),
        phonon: if cfg.phonon_assisted { PhononModel::default() } else { PhononModel::disabled() },
        pulse2_template: PulseSpec {
            duration_fwhm_ps: cfg.pulse2_duration_ps,
            ..PulseSpec::with_power(cfg.pulse1.detuning_nm, 0.0)
        },
        delay_ps: cfg.delay_ps,
        settings: SolverSettings { dt_ps: cfg.dt_ps, ..Default::default() },
    };
    let grid = scan_super(&cfg.emitter, &pulse1, &axes, &ctx)?;
    let (di, pi, v) = grid.max_cell().ok_or_else(|| Error::Statistics("every scan cell failed".into()))?;
    let [lo, hi] = cfg.ridge_band;
    let in_band = |d: f64| {
        let r = d / cfg.pulse1.detuning_nm;
        r >= lo - 1e-12 && r <= hi + 1e-12
    };
    let rows = (0..axes.power_nw.len())
        .filter(|&p| {
            let best = (0..axes.detuning_nm.len()).filter_map(|d| grid.get(d, p).map(|v| (d, v))).fold(
                None,
                |b: Option<(usize, f64)>, c| match b {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                },
            );
            best.is_some_and(|(d, v)| v > 0.0 && in_band(axes.detuning_nm[d]))
        })
        .count();
    let summary = ScanSummary {
        max_detuning_nm: axes.detuning_nm[di],
        max_power_nw: axes.power_nw[pi],
        max_occupation: v,
        max_ratio: axes.detuning_nm[di] / cfg.pulse1.detuning_nm,
        ridge_band: cfg.ridge_band,
        ridge_in_band: grid.ridge_in_band(lo, hi),
        rows_with_ridge_in_band: rows,
        invalid_cells: grid.failures.len(),
    };
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    Ok(ScanOutcome { grid, summary, csv })
}
