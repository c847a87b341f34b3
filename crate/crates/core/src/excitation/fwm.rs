use std::f64::consts::PI;

use crate::units::gaussian_exponent_from_fwhm;
use crate::{Error, Result};

/// ∫ exp(−a t²)·exp(−b (t − d)²) dt
fn gaussian_product_integral(a: f64, b: f64, d: f64) -> f64 {
    let s = a + b;
    (PI / s).sqrt() * (-a * b * d * d / s).exp()
}

/// Degenerate four-wave-mixing proxy for the temporal overlap of two
/// Gaussian pulses with intensity FWHMs `duration1_ps`, `duration2_ps` and
/// relative delay `delay_ps`:
///
/// ∫ I₁(t)² I₂(t − d) dt + ∫ I₁(t) I₂(t − d)² dt, with Iⱼ(t) = Pⱼ·exp(−4 ln2 t²/τⱼ²).
///
/// Evaluated in closed form, so the symmetric case is exactly even in delay.
pub fn fwm_overlap_proxy(p1_nw: f64, p2_nw: f64, delay_ps: f64, duration1_ps: f64, duration2_ps: f64) -> Result<f64> {
    if !(p1_nw >= 0.0) || !(p2_nw >= 0.0) {
        return Err(Error::domain("powers must be >= 0"));
    }
    if !(duration1_ps > 0.0) || !(duration2_ps > 0.0) {
        return Err(Error::domain("pulse durations must be > 0"));
    }
    let a1 = gaussian_exponent_from_fwhm(duration1_ps);
    let a2 = gaussian_exponent_from_fwhm(duration2_ps);
    let t1 = p1_nw * p1_nw * p2_nw * gaussian_product_integral(2.0 * a1, a2, delay_ps);
    let t2 = p1_nw * p2_nw * p2_nw * gaussian_product_integral(a1, 2.0 * a2, delay_ps);
    Ok(t1 + t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Direct midpoint quadrature of the defining integrals.
    fn quadrature(p1: f64, p2: f64, d: f64, w1: f64, w2: f64) -> f64 {
        let i1 = |t: f64| p1 * (-4.0 * std::f64::consts::LN_2 * t * t / (w1 * w1)).exp();
        let i2 = |t: f64| p2 * (-4.0 * std::f64::consts::LN_2 * t * t / (w2 * w2)).exp();
        let h = 1e-3;
        let span = 10.0 * (w1 + w2) + d.abs();
        let n = (2.0 * span / h) as usize;
        (0..n)
            .map(|i| {
                let t = -span + (i as f64 + 0.5) * h;
                (i1(t).powi(2) * i2(t - d) + i1(t) * i2(t - d).powi(2)) * h
            })
            .sum()
    }

    #[test]
    fn matches_quadrature() {
        for &(d, w1, w2) in &[(0.0, 6.0, 6.0), (2.5, 6.0, 4.0), (-7.0, 3.0, 8.0)] {
            let closed = fwm_overlap_proxy(350.0, 700.0, d, w1, w2).unwrap();
            assert_relative_eq!(closed, quadrature(350.0, 700.0, d, w1, w2), max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_second_power_gives_zero() {
        assert_eq!(fwm_overlap_proxy(350.0, 0.0, 1.0, 6.0, 6.0).unwrap(), 0.0);
    }

    #[test]
    fn doubling_powers_scales_by_eight() {
        let a = fwm_overlap_proxy(350.0, 700.0, 1.3, 6.0, 5.0).unwrap();
        let b = fwm_overlap_proxy(700.0, 1400.0, 1.3, 6.0, 5.0).unwrap();
        assert_eq!(b, 8.0 * a);
    }

    #[test]
    fn negative_power_is_domain_error() {
        assert!(fwm_overlap_proxy(-1.0, 1.0, 0.0, 6.0, 6.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_pulses_are_even_in_delay(d in 0.0f64..50.0, w in 0.5f64..20.0, p in 0.0f64..2000.0) {
            let plus = fwm_overlap_proxy(p, p, d, w, w).unwrap();
            let minus = fwm_overlap_proxy(p, p, -d, w, w).unwrap();
            prop_assert_eq!(plus, minus);
        }

        #[test]
        fn maximal_at_zero_delay_and_decreasing(d in 0.01f64..40.0, w1 in 0.5f64..20.0, w2 in 0.5f64..20.0) {
            let at0 = fwm_overlap_proxy(300.0, 500.0, 0.0, w1, w2).unwrap();
            let at_d = fwm_overlap_proxy(300.0, 500.0, d, w1, w2).unwrap();
            let further = fwm_overlap_proxy(300.0, 500.0, d * 1.5, w1, w2).unwrap();
            prop_assert!(at0 >= at_d);
            prop_assert!(at_d >= further);
        }
    }
}
