use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_trigger_sorted, trigger_blocks};
use crate::rng::{Purpose, SeedTree};
use crate::stream::{PhotonKind, PhotonRecord};
use crate::units::GAUSSIAN_FWHM_PER_SIGMA;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    LorentzianEtalon,
    GaussianBandpass,
    /// Lorentzian stop band: transmission 1 − L(ν).
    Notch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    #[serde(default)]
    pub center_ghz: f64,
    #[serde(default = "default_etalon_fwhm")]
    pub fwhm_ghz: f64,
    #[serde(default = "one")]
    pub peak_transmission: f64,
}

fn default_etalon_fwhm() -> f64 {
    FilterSpec::DEFAULT_ETALON_FWHM_GHZ
}

fn one() -> f64 {
    1.0
}

impl FilterSpec {
    pub const DEFAULT_ETALON_FWHM_GHZ: f64 = 0.885;

    pub fn etalon(center_ghz: f64, fwhm_ghz: f64) -> Self {
        Self { kind: FilterKind::LorentzianEtalon, center_ghz, fwhm_ghz, peak_transmission: 1.0 }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.fwhm_ghz > 0.0) || !self.fwhm_ghz.is_finite() {
            return Err(Error::config(format!("{path}.fwhm_ghz"), "must be > 0"));
        }
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return Err(Error::config(format!("{path}.peak_transmission"), "must lie in (0, 1]"));
        }
        if !self.center_ghz.is_finite() {
            return Err(Error::config(format!("{path}.center_ghz"), "must be finite"));
        }
        Ok(())
    }

    /// Normalized transmission shape at offset `nu_ghz` (peak 1, before
    /// `peak_transmission`).
    pub fn shape(&self, nu_ghz: f64) -> f64 {
        let x = (nu_ghz - self.center_ghz) / (0.5 * self.fwhm_ghz);
        match self.kind {
            FilterKind::LorentzianEtalon => 1.0 / (1.0 + x * x),
            FilterKind::GaussianBandpass => (-std::f64::consts::LN_2 * x * x).exp(),
            FilterKind::Notch => x * x / (1.0 + x * x),
        }
    }

    pub fn transmission(&self, nu_ghz: f64) -> f64 {
        self.peak_transmission * self.shape(nu_ghz)
    }

    fn narrows_line(&self) -> bool {
        !matches!(self.kind, FilterKind::Notch)
    }
}

/// Gaussian-equivalent FWHM of the signal centre frequencies in a stream
/// (all photons if there is no signal photon).
pub fn stream_width_proxy_ghz(photons: &[PhotonRecord]) -> f64 {
    let signal: Vec<f64> =
        photons.iter().filter(|p| p.kind == PhotonKind::Signal).map(|p| p.center_frequency_offset_ghz).collect();
    let values: Vec<f64> =
        if signal.is_empty() { photons.iter().map(|p| p.center_frequency_offset_ghz).collect() } else { signal };
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    GAUSSIAN_FWHM_PER_SIGMA * var.sqrt()
}

/// Bernoulli loss at each photon's centre frequency.
///
/// Survivors are flagged `filtered`. A band-pass filter narrower than the
/// incoming line also sets the survivor's effective linewidth to
/// max(own width, min(stream width proxy, filter FWHM)).
pub fn apply_filter(photons: &[PhotonRecord], filter: &FilterSpec, seeds: &SeedTree) -> Result<Vec<PhotonRecord>> {
    filter.validate("filter")?;
    if !is_trigger_sorted(photons) {
        return Err(Error::domain("photons must be sorted by trigger index"));
    }
    let proxy = stream_width_proxy_ghz(photons);
    let target = proxy.min(filter.fwhm_ghz);
    let blocks = trigger_blocks(photons);
    let kept: Vec<Vec<PhotonRecord>> = blocks
        .par_iter()
        .map(|(b, chunk)| {
            let mut rng = seeds.stream(Purpose::Filter, *b);
            chunk
                .iter()
                .filter_map(|p| {
                    let t = filter.transmission(p.center_frequency_offset_ghz);
                    if rng.random::<f64>() < t {
                        let mut q = *p;
                        q.filtered = true;
                        if filter.narrows_line() {
                            q.linewidth_ghz = q.linewidth_ghz.max(target);
                        }
                        Some(q)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    Ok(kept.into_iter().flatten().collect())
}

/// Applies filters in order, each with its own random substream.
pub fn apply_filters(photons: &[PhotonRecord], filters: &[FilterSpec], seeds: &SeedTree) -> Result<Vec<PhotonRecord>> {
    let mut cur = photons.to_vec();
    for (i, f) in filters.iter().enumerate() {
        f.validate(&format!("filters[{i}]"))?;
        cur = apply_filter(&cur, f, &seeds.child(i as u64 + 1))?;
    }
    Ok(cur)
}

/// Polarization-maintaining fibre coupling: keeps photons that pass the
/// polarizer.
pub fn couple_polarized(photons: &[PhotonRecord]) -> Vec<PhotonRecord> {
    photons.iter().filter(|p| p.passes_polarizer).copied().collect()
}

/// Indistinguishability of two photons with Lorentzian lines:
/// Γ²/(Γ² + (2πδν)²)·η_deph with Γ = 2π × mean effective linewidth.
pub fn mode_overlap(a: &PhotonRecord, b: &PhotonRecord, dephasing_ceiling: f64) -> f64 {
    let w = 0.5 * (a.linewidth_ghz + b.linewidth_ghz);
    let d = a.center_frequency_offset_ghz - b.center_frequency_offset_ghz;
    if w <= 0.0 {
        return if d == 0.0 { dephasing_ceiling } else { 0.0 };
    }
    w * w / (w * w + d * d) * dephasing_ceiling
}
