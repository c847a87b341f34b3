//! Pulsed excitation of a two-level emitter.
//!
//! Detunings are given in nanometres with the laboratory convention
//! (positive = red-detuned, i.e. longer wavelength than the transition) and
//! converted to a negative angular detuning in the Hamiltonian.

mod dynamics;
mod fwm;
mod phonon;
mod scan;

pub use dynamics::{
    final_occupation, solve_dynamics, verify_step_convergence, DynamicsMode, QuantumState, SolverSettings, Trajectory,
    TrajectoryPoint,
};
pub use fwm::fwm_overlap_proxy;
pub use phonon::PhononModel;
pub use scan::{delay_scan, preparation_probability, scan_super, Preparation, ScanAxes, ScanContext, ScanGrid};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::units::{detuning_nm_to_angular_frequency, gaussian_sigma_from_fwhm};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterParams {
    pub transition_wavelength_nm: f64,
    pub lifetime_ps: f64,
    pub fourier_linewidth_ghz: f64,
    pub purcell_factor: f64,
    pub polarization_degree: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        Self {
            transition_wavelength_nm: 1551.0,
            lifetime_ps: 500.0,
            fourier_linewidth_ghz: 0.32,
            purcell_factor: 4.3,
            polarization_degree: 0.95,
        }
    }
}

impl EmitterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_ps > 0.0) {
            return Err(Error::config("emitter.lifetime_ps", "must be > 0"));
        }
        if !(self.transition_wavelength_nm > 0.0) {
            return Err(Error::config("emitter.transition_wavelength_nm", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.polarization_degree) {
            return Err(Error::config("emitter.polarization_degree", "must lie in [0, 1]"));
        }
        if !(self.fourier_linewidth_ghz > 0.0) {
            return Err(Error::config("emitter.fourier_linewidth_ghz", "must be > 0"));
        }
        let implied = self.fourier_limit_from_lifetime_ghz();
        if (self.fourier_linewidth_ghz - implied).abs() > 0.05 * implied {
            return Err(Error::config(
                "emitter.fourier_linewidth_ghz",
                format!(
                    "{} GHz is inconsistent with lifetime {} ps (1/(2πT₁) = {implied:.4} GHz)",
                    self.fourier_linewidth_ghz, self.lifetime_ps
                ),
            ));
        }
        Ok(())
    }

    /// 1/(2πT₁) in GHz.
    pub fn fourier_limit_from_lifetime_ghz(&self) -> f64 {
        1e3 / (2.0 * PI * self.lifetime_ps)
    }

    pub fn decay_rate_per_ps(&self) -> f64 {
        1.0 / self.lifetime_ps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Gaussian,
    Sech,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseStrength {
    /// Pulse area ∫Ω dt in radians.
    Area(f64),
    /// Time-averaged power at the sample in nW, converted via [`PowerCalibration`].
    PowerNw(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Laboratory convention: positive = red-detuned.
    pub detuning_nm: f64,
    pub strength: PulseStrength,
    /// FWHM of the intensity envelope |Ω(t)|².
    pub duration_fwhm_ps: f64,
    pub envelope: Envelope,
}

pub const DEFAULT_PULSE_FWHM_PS: f64 = 6.0;

impl PulseSpec {
    pub fn with_power(detuning_nm: f64, power_nw: f64) -> Self {
        Self {
            detuning_nm,
            strength: PulseStrength::PowerNw(power_nw),
            duration_fwhm_ps: DEFAULT_PULSE_FWHM_PS,
            envelope: Envelope::Gaussian,
        }
    }

    pub fn with_area(detuning_nm: f64, area_rad: f64) -> Self {
        Self {
            detuning_nm,
            strength: PulseStrength::Area(area_rad),
            duration_fwhm_ps: DEFAULT_PULSE_FWHM_PS,
            envelope: Envelope::Gaussian,
        }
    }

    /// Hamiltonian detuning ω_laser − ω_transition in rad/ps (red → negative).
    pub fn detuning_rad_per_ps(&self, emitter: &EmitterParams) -> Result<f64> {
        Ok(-detuning_nm_to_angular_frequency(self.detuning_nm, emitter.transition_wavelength_nm)?)
    }

    pub fn area(&self, calibration: &PowerCalibration, rep_rate_mhz: f64) -> f64 {
        match self.strength {
            PulseStrength::Area(a) => a,
            PulseStrength::PowerNw(p) => calibration.area(p, rep_rate_mhz),
        }
    }

    pub fn power_nw(&self, calibration: &PowerCalibration, rep_rate_mhz: f64) -> f64 {
        match self.strength {
            PulseStrength::PowerNw(p) => p,
            PulseStrength::Area(a) => calibration.power_nw(a, rep_rate_mhz),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.duration_fwhm_ps > 0.0) {
            return Err(Error::config(format!("{path}.duration_ps"), "must be > 0"));
        }
        if !self.detuning_nm.is_finite() {
            return Err(Error::config(format!("{path}.detuning_nm"), "must be finite"));
        }
        match self.strength {
            PulseStrength::Area(a) if !(a >= 0.0) => Err(Error::config(format!("{path}.area_rad"), "must be >= 0")),
            PulseStrength::PowerNw(p) if !(p >= 0.0) => Err(Error::config(format!("{path}.power_nw"), "must be >= 0")),
            _ => Ok(()),
        }
    }
}

/// Pulse area = κ·√(P / f_rep), i.e. proportional to the square root of the
/// pulse energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCalibration {
    pub kappa: f64,
}

impl Default for PowerCalibration {
    /// 350 nW at 76 MHz maps to a 10π pulse.
    fn default() -> Self {
        Self::from_reference(350.0, 76.0, 10.0 * PI)
    }
}

impl PowerCalibration {
    pub fn from_reference(power_nw: f64, rep_rate_mhz: f64, area_rad: f64) -> Self {
        Self { kappa: area_rad / (power_nw / rep_rate_mhz).sqrt() }
    }

    pub fn area(&self, power_nw: f64, rep_rate_mhz: f64) -> f64 {
        self.kappa * (power_nw / rep_rate_mhz).sqrt()
    }

    pub fn power_nw(&self, area_rad: f64, rep_rate_mhz: f64) -> f64 {
        (area_rad / self.kappa).powi(2) * rep_rate_mhz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub pulses: Vec<PulseSpec>,
    /// Centre of pulse 2 relative to pulse 1; ignored for single-pulse drives.
    pub inter_pulse_delay_ps: f64,
    pub repetition_rate_mhz: f64,
    /// Per-trigger incoherent (phonon-assisted) preparation probability.
    pub phonon_pump_rate: f64,
    pub calibration: PowerCalibration,
}

impl DriveConfig {
    pub fn single(pulse: PulseSpec, repetition_rate_mhz: f64) -> Self {
        Self {
            pulses: vec![pulse],
            inter_pulse_delay_ps: 0.0,
            repetition_rate_mhz,
            phonon_pump_rate: 0.0,
            calibration: PowerCalibration::default(),
        }
    }

    pub fn two_color(p1: PulseSpec, p2: PulseSpec, delay_ps: f64, repetition_rate_mhz: f64) -> Self {
        Self {
            pulses: vec![p1, p2],
            inter_pulse_delay_ps: delay_ps,
            repetition_rate_mhz,
            phonon_pump_rate: 0.0,
            calibration: PowerCalibration::default(),
        }
    }

    /// Fills `phonon_pump_rate` from a phenomenological phonon model.
    pub fn with_phonon_model(mut self, model: &PhononModel) -> Self {
        self.phonon_pump_rate = model.drive_rate(&self);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses.is_empty() || self.pulses.len() > 2 {
            return Err(Error::config("pulses", "expected one or two pulses"));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            p.validate(&format!("pulses[{i}]"))?;
        }
        if !(self.repetition_rate_mhz > 0.0) {
            return Err(Error::config("drive.rep_rate_mhz", "must be > 0"));
        }
        if !self.inter_pulse_delay_ps.is_finite() {
            return Err(Error::config("drive.delay_ps", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.phonon_pump_rate) {
            return Err(Error::config("drive.phonon_pump_rate", "must lie in [0, 1]"));
        }
        if !(self.calibration.kappa > 0.0) {
            return Err(Error::config("drive.kappa", "must be > 0"));
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, emitter: &EmitterParams) -> Result<Vec<ResolvedPulse>> {
        self.pulses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let center = if i == 0 { 0.0 } else { self.inter_pulse_delay_ps };
                ResolvedPulse::new(
                    p,
                    p.area(&self.calibration, self.repetition_rate_mhz),
                    p.detuning_rad_per_ps(emitter)?,
                    center,
                )
            })
            .collect()
    }
}

/// A pulse reduced to Rabi envelope parameters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedPulse {
    pub detuning: f64,
    pub peak_rabi: f64,
    /// Gaussian field σ or sech time constant.
    pub width: f64,
    pub center: f64,
    pub envelope: Envelope,
}

/// Intensity FWHM of sech²(t/T) is 2·acosh(√2)·T.
const SECH_FWHM_PER_T: f64 = 1.762_747_174_039_086;

impl ResolvedPulse {
    fn new(spec: &PulseSpec, area: f64, detuning: f64, center: f64) -> Result<Self> {
        let (width, peak_rabi) = match spec.envelope {
            Envelope::Gaussian => {
                let sigma_field = std::f64::consts::SQRT_2 * gaussian_sigma_from_fwhm(spec.duration_fwhm_ps);
                (sigma_field, area / (sigma_field * (2.0 * PI).sqrt()))
            }
            Envelope::Sech => {
                let t = spec.duration_fwhm_ps / SECH_FWHM_PER_T;
                (t, area / (PI * t))
            }
        };
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::domain("pulse width must be positive"));
        }
        Ok(Self { detuning, peak_rabi, width, center, envelope: spec.envelope })
    }

    #[inline]
    pub fn rabi(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        match self.envelope {
            Envelope::Gaussian => self.peak_rabi * (-0.5 * x * x).exp(),
            Envelope::Sech => self.peak_rabi / x.cosh(),
        }
    }

    /// Half-extent of the integration window around the pulse centre.
    pub fn half_window(&self) -> f64 {
        match self.envelope {
            Envelope::Gaussian => 8.0 * self.width,
            Envelope::Sech => 22.0 * self.width,
        }
    }
}
