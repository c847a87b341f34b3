use rayon::prelude::*;
use serde::Serialize;

use super::dynamics::{final_occupation, DynamicsMode, SolverSettings};
use super::{DriveConfig, EmitterParams, PhononModel, PowerCalibration, PulseSpec, PulseStrength};
use crate::{Error, Result};

/// Coherent and incoherent contributions to the per-trigger preparation
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preparation {
    pub coherent: f64,
    pub phonon: f64,
    /// 1 − (1 − coherent)(1 − phonon)
    pub total: f64,
}

/// Preparation probability of a drive: coherent occupation from the
/// dynamics plus the drive's phonon-assisted rate as an independent channel.
pub fn preparation_probability(emitter: &EmitterParams, drive: &DriveConfig, settings: &SolverSettings) -> Result<Preparation> {
    let coherent = final_occupation(emitter, drive, DynamicsMode::Unitary, settings)?.clamp(0.0, 1.0);
    let phonon = drive.phonon_pump_rate;
    Ok(Preparation { coherent, phonon, total: 1.0 - (1.0 - coherent) * (1.0 - phonon) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxes {
    /// Δ₂ values (nm, red-detuned > 0).
    pub detuning_nm: Vec<f64>,
    /// P₂ values (nW).
    pub power_nw: Vec<f64>,
}

impl ScanAxes {
    pub fn cells(&self) -> usize {
        self.detuning_nm.len() * self.power_nw.len()
    }
}

/// Fixed settings shared by every cell of a swing-up scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanContext {
    pub repetition_rate_mhz: f64,
    pub calibration: PowerCalibration,
    pub phonon: PhononModel,
    /// Template for pulse 2 (duration and envelope are taken from it).
    pub pulse2_template: PulseSpec,
    pub delay_ps: f64,
    pub settings: SolverSettings,
}

impl Default for ScanContext {
    fn default() -> Self {
        Self {
            repetition_rate_mhz: 76.0,
            calibration: PowerCalibration::default(),
            phonon: PhononModel::default(),
            pulse2_template: PulseSpec::with_power(0.0, 0.0),
            delay_ps: 0.0,
            settings: SolverSettings::default(),
        }
    }
}

/// Background-corrected preparation map. Cells are stored row-major with
/// one row per power value; `None` marks a cell whose solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub detuning_axis_nm: Vec<f64>,
    pub power_axis_nw: Vec<f64>,
    pub cells: Vec<Option<f64>>,
    pub failures: Vec<String>,
    /// Δ₁ of the fixed pulse, for ratio-based summaries.
    pub reference_detuning_nm: f64,
}

impl ScanGrid {
    pub fn get(&self, detuning_index: usize, power_index: usize) -> Option<f64> {
        self.cells[power_index * self.detuning_axis_nm.len() + detuning_index]
    }

    /// (detuning index, power index, value) of the largest valid cell.
    pub fn max_cell(&self) -> Option<(usize, usize, f64)> {
        let n = self.detuning_axis_nm.len();
        self.cells.iter().enumerate().filter_map(|(i, c)| c.map(|v| (i % n, i / n, v))).fold(
            None,
            |best: Option<(usize, usize, f64)>, cur| match best {
                Some(b) if b.2 >= cur.2 => Some(b),
                _ => Some(cur),
            },
        )
    }

    /// Whether the global maximum sits at Δ₂/Δ₁ ∈ [lo, hi].
    pub fn ridge_in_band(&self, lo: f64, hi: f64) -> bool {
        self.max_cell()
            .map(|(i, _, _)| {
                let r = self.detuning_axis_nm[i] / self.reference_detuning_nm;
                r >= lo - 1e-12 && r <= hi + 1e-12
            })
            .unwrap_or(false)
    }

    /// Value below which `q` of the valid cells lie (nearest-rank).
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let mut v: Vec<f64> = self.cells.iter().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
        Some(v[idx])
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["detuning_nm", "power_nw", "occupation"])?;
        for (pi, p) in self.power_axis_nw.iter().enumerate() {
            for (di, d) in self.detuning_axis_nm.iter().enumerate() {
                let occ = self.get(di, pi).map(|v| v.to_string()).unwrap_or_default();
                wr.write_record([d.to_string(), p.to_string(), occ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn total_with_phonon(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    phonon: &PhononModel,
    settings: &SolverSettings,
) -> Result<f64> {
    let drive = drive.clone().with_phonon_model(phonon);
    Ok(preparation_probability(emitter, &drive, settings)?.total)
}

/// Scans Δ₂ and P₂ of the second pulse for a fixed first pulse.
///
/// Each cell holds the two-colour preparation probability minus the two
/// single-laser values (each including its phonon-assisted part), clamped
/// to [0, 1]. Cells are independent and evaluated in parallel.
pub fn scan_super(emitter: &EmitterParams, pulse1: &PulseSpec, axes: &ScanAxes, ctx: &ScanContext) -> Result<ScanGrid> {
    if axes.detuning_nm.is_empty() || axes.power_nw.is_empty() {
        return Err(Error::domain("scan axes must be nonempty"));
    }
    if axes.detuning_nm.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::domain("Δ₂ axis must be strictly red-detuned (> 0 nm)"));
    }
    if !(pulse1.detuning_nm > 0.0) {
        return Err(Error::domain("pulse 1 must be red-detuned"));
    }
    let single = |p: PulseSpec| {
        let mut d = DriveConfig::single(p, ctx.repetition_rate_mhz);
        d.calibration = ctx.calibration;
        total_with_phonon(emitter, &d, &ctx.phonon, &ctx.settings)
    };
    let single1 = single(*pulse1)?;
    let n_det = axes.detuning_nm.len();
    let results: Vec<std::result::Result<f64, String>> = (0..axes.cells())
        .into_par_iter()
        .map(|idx| {
            let det = axes.detuning_nm[idx % n_det];
            let pow = axes.power_nw[idx / n_det];
            let p2 = PulseSpec { detuning_nm: det, strength: PulseStrength::PowerNw(pow), ..ctx.pulse2_template };
            let eval = || -> Result<f64> {
                let mut both = DriveConfig::two_color(*pulse1, p2, ctx.delay_ps, ctx.repetition_rate_mhz);
                both.calibration = ctx.calibration;
                let total = total_with_phonon(emitter, &both, &ctx.phonon, &ctx.settings)?;
                let single2 = single(p2)?;
                let v = (total - single1 - single2).clamp(0.0, 1.0);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::domain("non-finite occupation"))
                }
            };
            eval().map_err(|e| format!("Δ₂ = {det} nm, P₂ = {pow} nW: {e}"))
        })
        .collect();
    let mut failures = Vec::new();
    let cells = results
        .into_iter()
        .map(|r| match r {
            Ok(v) => Some(v),
            Err(msg) => {
                failures.push(msg);
                None
            }
        })
        .collect();
    Ok(ScanGrid {
        detuning_axis_nm: axes.detuning_nm.clone(),
        power_axis_nw: axes.power_nw.clone(),
        cells,
        failures,
        reference_detuning_nm: pulse1.detuning_nm,
    })
}

/// Preparation probability (coherent ⊕ phonon) of a two-pulse drive versus
/// the delay of pulse 2.
pub fn delay_scan(
    emitter: &EmitterParams,
    drive: &DriveConfig,
    delays_ps: &[f64],
    phonon: &PhononModel,
    settings: &SolverSettings,
) -> Result<Vec<(f64, f64)>> {
    if drive.pulses.len() != 2 {
        return Err(Error::domain("delay scan needs a two-pulse drive"));
    }
    delays_ps
        .par_iter()
        .map(|&d| {
            let mut dr = drive.clone();
            dr.inter_pulse_delay_ps = d;
            Ok((d, total_with_phonon(emitter, &dr, phonon, settings)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_axes() -> ScanAxes {
        ScanAxes { detuning_nm: vec![9.0, 10.8, 12.0], power_nw: vec![0.0, 700.0] }
    }

    #[test]
    fn zero_power_column_is_zero_after_correction() {
        let e = EmitterParams::default();
        let g = scan_super(&e, &PulseSpec::with_power(4.0, 350.0), &small_axes(), &ScanContext::default()).unwrap();
        for i in 0..3 {
            assert!(g.get(i, 0).unwrap() < 1e-9);
        }
        assert!(g.failures.is_empty());
    }

    #[test]
    fn rejects_blue_axis() {
        let e = EmitterParams::default();
        let axes = ScanAxes { detuning_nm: vec![-1.0], power_nw: vec![1.0] };
        assert!(scan_super(&e, &PulseSpec::with_power(4.0, 350.0), &axes, &ScanContext::default()).is_err());
        let empty = ScanAxes { detuning_nm: vec![], power_nw: vec![1.0] };
        assert!(scan_super(&e, &PulseSpec::with_power(4.0, 350.0), &empty, &ScanContext::default()).is_err());
    }

    #[test]
    fn failed_cells_are_marked_and_scan_continues() {
        let e = EmitterParams::default();
        let mut ctx = ScanContext::default();
        ctx.pulse2_template.duration_fwhm_ps = -1.0;
        let g = scan_super(&e, &PulseSpec::with_power(4.0, 350.0), &small_axes(), &ctx).unwrap();
        assert!(g.cells.iter().all(|c| c.is_none()));
        assert_eq!(g.failures.len(), 6);
    }

    #[test]
    fn csv_has_header_and_one_row_per_cell() {
        let g = ScanGrid {
            detuning_axis_nm: vec![1.0, 2.0],
            power_axis_nw: vec![3.0],
            cells: vec![Some(0.5), None],
            failures: vec![],
            reference_detuning_nm: 1.0,
        };
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "detuning_nm,power_nw,occupation\n1,3,0.5\n2,3,\n");
    }

    #[test]
    fn quantile_and_max() {
        let g = ScanGrid {
            detuning_axis_nm: vec![1.0, 2.0, 3.0],
            power_axis_nw: vec![1.0, 2.0],
            cells: vec![Some(0.1), Some(0.2), Some(0.9), Some(0.3), None, Some(0.4)],
            failures: vec![],
            reference_detuning_nm: 1.0,
        };
        assert_eq!(g.max_cell(), Some((2, 0, 0.9)));
        assert_eq!(g.quantile(0.5), Some(0.3));
        assert_eq!(g.quantile(1.0), Some(0.9));
        assert!(g.ridge_in_band(2.5, 3.0));
        assert!(!g.ridge_in_band(1.0, 2.0));
    }
}
