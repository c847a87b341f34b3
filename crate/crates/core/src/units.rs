//! Unit bridges. Internally times are picoseconds, angular frequencies rad/ps
//! and spectral offsets GHz.

use std::f64::consts::{LN_2, PI};

use crate::{Error, Result};

pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// FWHM / σ for a Gaussian.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Converts a wavelength detuning into an angular frequency, Δω = 2π·c·Δλ/λ².
///
/// The sign of `detuning_nm` is preserved; callers decide what sign means.
pub fn detuning_nm_to_angular_frequency(detuning_nm: f64, carrier_nm: f64) -> Result<f64> {
    if !(carrier_nm > 0.0) || !carrier_nm.is_finite() {
        return Err(Error::domain(format!("carrier wavelength must be positive, got {carrier_nm} nm")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS * detuning_nm / (carrier_nm * carrier_nm))
}

pub fn ghz_to_rad_per_ps(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz * 1e-3
}

pub fn rep_period_ps(rep_rate_mhz: f64) -> f64 {
    1e6 / rep_rate_mhz
}

pub fn gaussian_sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / GAUSSIAN_FWHM_PER_SIGMA
}

/// Exponent coefficient `a` of exp(-a t²) for an intensity FWHM.
pub(crate) fn gaussian_exponent_from_fwhm(fwhm: f64) -> f64 {
    4.0 * LN_2 / (fwhm * fwhm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_detuning_is_zero() {
        assert_eq!(detuning_nm_to_angular_frequency(0.0, 1551.0).unwrap(), 0.0);
    }

    #[test]
    fn four_nm_at_1551() {
        // c·Δλ/λ² = 299792.458·4/1551² THz-ish ps⁻¹ = 0.49849 ps⁻¹
        let w = detuning_nm_to_angular_frequency(4.0, 1551.0).unwrap();
        let expected = 2.0 * PI * 299_792.458 * 4.0 / (1551.0_f64 * 1551.0);
        assert_relative_eq!(w, expected, max_relative = 1e-15);
        assert_relative_eq!(w, 3.133, max_relative = 1e-3);
    }

    #[test]
    fn linear_in_detuning() {
        let a = detuning_nm_to_angular_frequency(4.0, 1551.0).unwrap();
        let b = detuning_nm_to_angular_frequency(10.75, 1551.0).unwrap();
        assert_relative_eq!(b / a, 2.6875, max_relative = 1e-12);
        let neg = detuning_nm_to_angular_frequency(-4.0, 1551.0).unwrap();
        assert_eq!(neg, -a);
    }

    #[test]
    fn rejects_nonpositive_carrier() {
        assert!(detuning_nm_to_angular_frequency(1.0, 0.0).is_err());
        assert!(detuning_nm_to_angular_frequency(1.0, -3.0).is_err());
        assert!(detuning_nm_to_angular_frequency(1.0, f64::NAN).is_err());
    }
}
