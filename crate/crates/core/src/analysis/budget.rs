use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub cr_raw_mhz: f64,
    pub eta_detection: f64,
    pub g2_zero: f64,
    pub rep_rate_mhz: f64,
    /// Polarized single-photon rate at the fibre: CR_raw/η_det·√(1 − g²(0)).
    pub cr_end_mhz: f64,
    pub eta_end: f64,
}

pub fn efficiency_budget(cr_raw_mhz: f64, eta_detection: f64, g2_zero: f64, rep_rate_mhz: f64) -> Result<EfficiencyBudget> {
    if !(cr_raw_mhz >= 0.0) || !cr_raw_mhz.is_finite() {
        return Err(Error::domain("cr_raw must be finite and >= 0"));
    }
    if !(eta_detection > 0.0 && eta_detection <= 1.0) {
        return Err(Error::domain("eta_detection must lie in (0, 1]"));
    }
    if !(0.0..1.0).contains(&g2_zero) {
        return Err(Error::domain("g2_zero must lie in [0, 1)"));
    }
    if !(rep_rate_mhz > 0.0) || !rep_rate_mhz.is_finite() {
        return Err(Error::domain("rep_rate must be > 0"));
    }
    let cr_end_mhz = cr_raw_mhz / eta_detection * (1.0 - g2_zero).sqrt();
    Ok(EfficiencyBudget { cr_raw_mhz, eta_detection, g2_zero, rep_rate_mhz, cr_end_mhz, eta_end: cr_end_mhz / rep_rate_mhz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(efficiency_budget(1.0, 0.0, 0.1, 152.0).is_err());
        assert!(efficiency_budget(1.0, 0.5, 1.0, 152.0).is_err());
        assert!(efficiency_budget(-1.0, 0.5, 0.1, 152.0).is_err());
        assert!(efficiency_budget(1.0, 0.5, 0.1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn identities_hold(cr in 0.0f64..100.0, eta in 0.01f64..1.0, g2 in 0.0f64..0.99, f in 1.0f64..1000.0) {
            let b = efficiency_budget(cr, eta, g2, f).unwrap();
            prop_assert!((b.cr_end_mhz * eta / (1.0 - g2).sqrt() - cr).abs() <= 1e-9 * cr.max(1.0));
            prop_assert!((b.eta_end * f - b.cr_end_mhz).abs() <= 1e-12 * b.cr_end_mhz.max(1.0));
        }
    }
}
