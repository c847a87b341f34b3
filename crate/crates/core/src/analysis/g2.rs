use serde::{Deserialize, Serialize};

use super::Histogram;
use crate::{Error, Result};

/// Side peaks used as the Poissonian reference, in repetition periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidePeakWindow {
    pub min_order: u32,
    pub max_order: u32,
}

impl Default for SidePeakWindow {
    fn default() -> Self {
        Self { min_order: 10, max_order: 20 }
    }
}

/// Dark-count rates of the two channels in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkRates {
    pub a_hz: f64,
    pub b_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub g2_zero: f64,
    pub g2_err: f64,
    /// (peak order m, raw area) for m = 0 and every reference side peak.
    pub peak_areas: Vec<(i64, u64)>,
    pub side_mean: f64,
    /// Accidental dark coincidences per window, subtracted from every area.
    pub pedestal: f64,
    pub dark_correction_applied: bool,
}

/// Raw area of peak m: bins with centre in [mT − T/2, mT + T/2).
pub fn peak_area(h: &Histogram, m: i64, period_ps: f64) -> u64 {
    let c = m as f64 * period_ps;
    h.window_sum(c - 0.5 * period_ps, c + 0.5 * period_ps)
}

fn check_span(h: &Histogram, period_ps: f64, max_order: u32) -> Result<()> {
    if !(period_ps > 0.0) {
        return Err(Error::domain("repetition period must be > 0"));
    }
    let need = (max_order as f64 + 0.5) * period_ps;
    if (h.span_ps() as f64) < need - 0.5 * h.bin_width_ps as f64 {
        return Err(Error::Statistics(format!(
            "histogram span {} ps does not cover side peaks up to order {max_order}",
            h.span_ps()
        )));
    }
    Ok(())
}

/// Dark-count pedestal per window of one period: accidental coincidences
/// between darks and signal clicks plus dark–dark pairs.
pub fn dark_pedestal(h: &Histogram, period_ps: f64, darks: &DarkRates) -> f64 {
    let d = h.total_duration_ps;
    if !(d > 0.0) {
        return 0.0;
    }
    let da = darks.a_hz * 1e-12;
    let db = darks.b_hz * 1e-12;
    let ra = (h.singles.0 as f64 / d - da).max(0.0);
    let rb = (h.singles.1 as f64 / d - db).max(0.0);
    (ra * db + da * rb + da * db) * period_ps * d
}

/// g²(0) from the central area over the mean reference side-peak area,
/// both corrected only for the dark-count pedestal.
pub fn g2_from_histogram(
    h: &Histogram,
    period_ps: f64,
    darks: Option<&DarkRates>,
    window: &SidePeakWindow,
) -> Result<CorrelationResult> {
    if window.min_order == 0 || window.max_order < window.min_order {
        return Err(Error::config("analysis.side_peaks", "need 1 <= min_order <= max_order"));
    }
    check_span(h, period_ps, window.max_order)?;
    let a0 = peak_area(h, 0, period_ps);
    let mut areas = vec![(0i64, a0)];
    let mut side_sum = 0u64;
    let mut n_side = 0u64;
    for m in window.min_order..=window.max_order {
        for s in [-(m as i64), m as i64] {
            let a = peak_area(h, s, period_ps);
            areas.push((s, a));
            side_sum += a;
            n_side += 1;
        }
    }
    let pedestal = darks.map(|d| dark_pedestal(h, period_ps, d)).unwrap_or(0.0);
    let side_mean = side_sum as f64 / n_side as f64;
    let denom = side_mean - pedestal;
    if !(denom > 0.0) {
        return Err(Error::Statistics("side peaks are empty after dark correction".into()));
    }
    let g2 = ((a0 as f64 - pedestal) / denom).max(0.0);
    let var_a0 = (a0 as f64).max(1.0);
    let var_side = side_sum as f64 / (n_side * n_side) as f64;
    let g2_err = (var_a0 + g2 * g2 * var_side).sqrt() / denom;
    Ok(CorrelationResult {
        g2_zero: g2,
        g2_err,
        peak_areas: areas,
        side_mean,
        pedestal,
        dark_correction_applied: darks.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub visibility: f64,
    pub error: f64,
    pub central_parallel: u64,
    pub central_orthogonal: u64,
    /// Parallel over orthogonal reference side-peak areas.
    pub side_ratio: f64,
    pub side_ratio_err: f64,
    /// Side-peak ratio differs from 1 by more than three standard errors.
    pub normalization_warning: bool,
}

/// V = 1 − A∥(0)/A⊥(0) over one full period centred at τ = 0.
pub fn tpi_visibility(h_par: &Histogram, h_orth: &Histogram, period_ps: f64) -> Result<VisibilityResult> {
    let window = SidePeakWindow::default();
    if !(period_ps > 0.0) {
        return Err(Error::domain("repetition period must be > 0"));
    }
    let a_par = peak_area(h_par, 0, period_ps);
    let a_orth = peak_area(h_orth, 0, period_ps);
    if a_orth == 0 {
        return Err(Error::UndefinedVisibility);
    }
    let ratio = a_par as f64 / a_orth as f64;
    let v = 1.0 - ratio;
    let err = ratio * (1.0 / (a_par as f64).max(1.0) + 1.0 / a_orth as f64).sqrt();

    let side = |h: &Histogram| -> u64 {
        (window.min_order..=window.max_order).flat_map(|m| [-(m as i64), m as i64]).map(|m| peak_area(h, m, period_ps)).sum()
    };
    let covered =
        check_span(h_par, period_ps, window.max_order).is_ok() && check_span(h_orth, period_ps, window.max_order).is_ok();
    let (sp, so) = if covered { (side(h_par), side(h_orth)) } else { (0, 0) };
    let (side_ratio, side_ratio_err, warn) = if sp > 0 && so > 0 {
        let r = sp as f64 / so as f64;
        let e = r * (1.0 / sp as f64 + 1.0 / so as f64).sqrt();
        (r, e, (r - 1.0).abs() > 3.0 * e)
    } else {
        (f64::NAN, f64::NAN, true)
    };
    if warn {
        log::warn!("HOM side-peak normalization check failed (ratio {side_ratio:.4} ± {side_ratio_err:.4})");
    }
    Ok(VisibilityResult {
        visibility: v,
        error: err,
        central_parallel: a_par,
        central_orthogonal: a_orth,
        side_ratio,
        side_ratio_err,
        normalization_warning: warn,
    })
}
