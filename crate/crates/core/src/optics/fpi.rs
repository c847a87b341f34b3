use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FilterSpec;
use crate::rng::{Purpose, SeedTree};
use crate::stream::PhotonRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanAxis {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub n_bins: usize,
}

impl ScanAxis {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins == 0 || !(self.stop_ghz > self.start_ghz) {
            return Err(Error::config("fpi.axis", "need n_bins > 0 and stop_ghz > start_ghz"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.stop_ghz - self.start_ghz) / self.n_bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins).map(|i| self.start_ghz + (i as f64 + 0.5) * w).collect()
    }

    fn bin_of(&self, nu: f64) -> Option<usize> {
        if nu < self.start_ghz || nu >= self.stop_ghz || !nu.is_finite() {
            return None;
        }
        Some((((nu - self.start_ghz) / self.bin_width()) as usize).min(self.n_bins - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freq_ghz: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpiSettings {
    pub instrument_fwhm_ghz: f64,
    pub axis: ScanAxis,
    /// Lorentzian width of each photon's line around its centre frequency.
    pub homogeneous_linewidth_ghz: f64,
    /// Filters in front of the spectrometer, applied at the sampled frequency.
    pub filters: Vec<FilterSpec>,
    pub seed: u64,
}

impl FpiSettings {
    pub const DEFAULT_INSTRUMENT_FWHM_GHZ: f64 = 0.07;

    pub fn new(axis: ScanAxis, homogeneous_linewidth_ghz: f64, seed: u64) -> Self {
        Self {
            instrument_fwhm_ghz: Self::DEFAULT_INSTRUMENT_FWHM_GHZ,
            axis,
            homogeneous_linewidth_ghz,
            filters: Vec::new(),
            seed,
        }
    }
}

fn cauchy<R: Rng>(rng: &mut R, hwhm: f64) -> f64 {
    if hwhm == 0.0 {
        return 0.0;
    }
    hwhm * (PI * (rng.random::<f64>() - 0.5)).tan()
}

/// Monte Carlo spectrometer scan: each photon is given a frequency from its
/// Lorentzian line, thinned by the filters, blurred by the Lorentzian
/// instrument response and histogrammed. Draws are keyed per photon, so the
/// scan of a merged stream is the bin-wise sum of the scans.
pub fn fpi_scan(photons: &[PhotonRecord], settings: &FpiSettings) -> Result<Spectrum> {
    if photons.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    settings.axis.validate()?;
    if !(settings.instrument_fwhm_ghz >= 0.0) || !(settings.homogeneous_linewidth_ghz >= 0.0) {
        return Err(Error::domain("line widths must be >= 0"));
    }
    for (i, f) in settings.filters.iter().enumerate() {
        f.validate(&format!("fpi.filters[{i}]"))?;
    }
    let seeds = SeedTree::new(settings.seed);
    let axis = settings.axis;
    let n = axis.n_bins;
    let counts = photons
        .par_chunks(8192)
        .fold(
            || vec![0u64; n],
            |mut acc, chunk| {
                for p in chunk {
                    let mut rng = seeds.stream(Purpose::Spectrometer, p.key());
                    let nu = p.center_frequency_offset_ghz + cauchy(&mut rng, 0.5 * settings.homogeneous_linewidth_ghz);
                    let t: f64 = settings.filters.iter().map(|f| f.transmission(nu)).product();
                    if rng.random::<f64>() >= t {
                        continue;
                    }
                    let seen = nu + cauchy(&mut rng, 0.5 * settings.instrument_fwhm_ghz);
                    if let Some(b) = axis.bin_of(seen) {
                        acc[b] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(Spectrum { freq_ghz: axis.centers(), counts: counts.into_iter().map(|c| c as f64).collect() })
}

/// A spectral line for the analytic scan path. Zero width is a delta line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub center_ghz: f64,
    pub lorentz_fwhm_ghz: f64,
    pub weight: f64,
}

/// Exact scan of a sum of Lorentzian (or delta) lines: each bin receives the
/// integral of the instrument-broadened line over the bin.
pub fn fpi_lines(lines: &[SpectralLine], instrument_fwhm_ghz: f64, axis: &ScanAxis) -> Result<Spectrum> {
    if lines.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    axis.validate()?;
    let w = axis.bin_width();
    let mut counts = vec![0.0; axis.n_bins];
    for line in lines {
        let hw = 0.5 * (line.lorentz_fwhm_ghz + instrument_fwhm_ghz);
        if !(hw > 0.0) {
            return Err(Error::domain("total line width must be > 0"));
        }
        let cdf = |x: f64| ((x - line.center_ghz) / hw).atan() / PI;
        for (i, c) in counts.iter_mut().enumerate() {
            let lo = axis.start_ghz + i as f64 * w;
            *c += line.weight * (cdf(lo + w) - cdf(lo));
        }
    }
    Ok(Spectrum { freq_ghz: axis.centers(), counts })
}

/// Writes "freq_ghz,counts".
pub fn write_spectrum_csv<W: std::io::Write>(s: &Spectrum, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["freq_ghz", "counts"])?;
    for (f, c) in s.freq_ghz.iter().zip(&s.counts) {
        wr.write_record([f.to_string(), c.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_spectrum_csv<R: std::io::Read>(r: R) -> Result<Spectrum> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "freq_ghz" || &headers[1] != "counts" {
        return Err(Error::Ingest { offset: 0, message: "expected header \"freq_ghz,counts\"".into() });
    }
    let mut s = Spectrum { freq_ghz: vec![], counts: vec![] };
    for rec in rd.records() {
        let rec = rec?;
        let offset = rec.position().map(|p| p.byte()).unwrap_or(0);
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Ingest { offset, message: format!("bad number in column {i}") })
        };
        s.freq_ghz.push(parse(0)?);
        s.counts.push(parse(1)?);
    }
    Ok(s)
}
