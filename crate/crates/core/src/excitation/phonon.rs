use serde::{Deserialize, Serialize};

use super::{DriveConfig, PulseSpec};

/// Phenomenological phonon-assisted preparation probability of one pulse:
///
/// p = A_side · S(|Δλ|) · (1 − exp(−E/E_sat)),  E = P / f_rep,
///
/// where S(x) ∝ x³·exp(−x²) is a bulk-phonon-like spectral factor scaled
/// to peak (S = 1) at `peak_detuning_nm`. Blue detuning (phonon emission)
/// uses `blue_amplitude`, red detuning (phonon absorption) `red_amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhononModel {
    pub blue_amplitude: f64,
    pub red_amplitude: f64,
    pub peak_detuning_nm: f64,
    /// Saturation pulse energy in fJ (nW / MHz).
    pub saturation_energy_fj: f64,
}

impl Default for PhononModel {
    fn default() -> Self {
        Self { blue_amplitude: 0.9, red_amplitude: 0.3, peak_detuning_nm: 2.0, saturation_energy_fj: 2.0 }
    }
}

impl PhononModel {
    pub fn disabled() -> Self {
        Self { blue_amplitude: 0.0, red_amplitude: 0.0, ..Self::default() }
    }

    pub fn spectral_factor(&self, detuning_nm: f64) -> f64 {
        // x³ e^{−x²} peaks at x = √1.5.
        let x = detuning_nm.abs() / self.peak_detuning_nm * 1.5f64.sqrt();
        let xp = 1.5f64.sqrt();
        (x / xp).powi(3) * (1.5 - x * x).exp()
    }

    pub fn pulse_rate(&self, detuning_nm: f64, power_nw: f64, rep_rate_mhz: f64) -> f64 {
        if power_nw <= 0.0 {
            return 0.0;
        }
        let amplitude = if detuning_nm < 0.0 { self.blue_amplitude } else { self.red_amplitude };
        let energy = power_nw / rep_rate_mhz;
        let p = amplitude * self.spectral_factor(detuning_nm) * (1.0 - (-energy / self.saturation_energy_fj).exp());
        p.clamp(0.0, 1.0)
    }

    pub fn spec_rate(&self, pulse: &PulseSpec, drive: &DriveConfig) -> f64 {
        let power = pulse.power_nw(&drive.calibration, drive.repetition_rate_mhz);
        self.pulse_rate(pulse.detuning_nm, power, drive.repetition_rate_mhz)
    }

    /// Combined rate for all pulses of a drive, treating them as independent
    /// channels: 1 − Π(1 − pⱼ).
    pub fn drive_rate(&self, drive: &DriveConfig) -> f64 {
        1.0 - drive.pulses.iter().map(|p| 1.0 - self.spec_rate(p, drive)).product::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_factor_peaks_at_reference() {
        let m = PhononModel::default();
        assert_relative_eq!(m.spectral_factor(2.0), 1.0, max_relative = 1e-12);
        assert!(m.spectral_factor(1.5) < 1.0);
        assert!(m.spectral_factor(2.5) < 1.0);
        assert_eq!(m.spectral_factor(0.0), 0.0);
    }

    #[test]
    fn zero_power_gives_zero_and_saturates() {
        let m = PhononModel::default();
        assert_eq!(m.pulse_rate(-2.0, 0.0, 152.0), 0.0);
        let weak = m.pulse_rate(-2.0, 10.0, 152.0);
        let strong = m.pulse_rate(-2.0, 1e6, 152.0);
        assert!(weak < strong);
        assert_relative_eq!(strong, m.blue_amplitude, max_relative = 1e-9);
    }

    #[test]
    fn red_side_is_weaker_than_blue() {
        let m = PhononModel::default();
        assert!(m.pulse_rate(4.0, 350.0, 76.0) < m.pulse_rate(-4.0, 350.0, 76.0));
        // Laser 1 of the swing-up pair alone: a few percent.
        let p = m.pulse_rate(4.0, 350.0, 76.0);
        assert!(p > 0.01 && p < 0.05, "p = {p}");
    }
}
