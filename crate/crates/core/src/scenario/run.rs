use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Instrument, Scenario};
use crate::analysis::TagFormat;
use crate::analysis::{build_correlation, efficiency_budget, fit_voigt, g2_from_histogram, tpi_visibility, DarkRates, Histogram};
use crate::optics::{
    apply_filters, couple_polarized, encode_binary9, encode_csv, fpi_scan, hbt, hom, write_spectrum_csv, DetectionRun,
    FpiSettings, HomMode, Timing,
};
use crate::rng::{Purpose, SeedTree};
use crate::stream::{generate_stream, write_stream_csv, PhotonRecord, StreamConfig};
use crate::Result;

/// Figures of merit. Absent quantities serialize as null.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub g2_zero: Option<f64>,
    pub g2_err: Option<f64>,
    pub v_tpi: Option<f64>,
    pub v_err: Option<f64>,
    pub fwhm_ghz: Option<f64>,
    pub splitting_ghz: Option<f64>,
    pub area_ratio: Option<f64>,
    pub cr_raw_mhz: Option<f64>,
    pub cr_end_mhz: Option<f64>,
    pub eta_end: Option<f64>,
}

impl Report {
    /// Fills fields that are absent here from `other`.
    pub fn merge(&mut self, other: &Report) {
        macro_rules! take {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = other.$f; } )* };
        }
        take!(g2_zero, g2_err, v_tpi, v_err, fwhm_ghz, splitting_ghz, area_ratio, cr_raw_mhz, cr_end_mhz, eta_end);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub report: Report,
    pub preparation_probability: f64,
    pub artifacts: Vec<Artifact>,
}

impl ScenarioOutput {
    /// Writes the report and every artifact into `dir`.
    pub fn write_to(&self, dir: &Path, report_name: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(report_name), self.report.to_json())?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.file_name), &a.bytes)?;
        }
        Ok(())
    }
}

fn histogram_csv(h: &Histogram) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    Ok(buf)
}

fn collect(photons: Vec<PhotonRecord>, efficiency: f64, seeds: &SeedTree) -> Vec<PhotonRecord> {
    if efficiency >= 1.0 {
        return photons;
    }
    photons.into_par_iter().filter(|p| seeds.keyed_unit(Purpose::Filter, p.key()) < efficiency).collect()
}

/// Photons after the source-side chain: polarizer, collection loss and
/// (optionally) the filters.
fn source_photons(s: &Scenario, seeds: &SeedTree, prep: f64, with_filters: bool) -> Result<Vec<PhotonRecord>> {
    let f = &s.file;
    let cfg = StreamConfig {
        n_triggers: f.n_triggers,
        repetition_rate_mhz: f.drive.rep_rate_mhz,
        preparation_probability: prep,
        rng_seed: seeds.seed(),
    };
    let mut photons = generate_stream(&f.emitter, &s.noise, &cfg)?;
    if f.chain.polarizer {
        photons = couple_polarized(&photons);
    }
    photons = collect(photons, f.chain.collection_efficiency, &seeds.child(0xc0));
    if with_filters && !f.chain.filters.is_empty() {
        photons = apply_filters(&photons, &f.chain.filters, &seeds.child(0xf1))?;
    }
    Ok(photons)
}

fn correlate(run: &DetectionRun, s: &Scenario) -> Result<Histogram> {
    let period = crate::units::rep_period_ps(s.file.drive.rep_rate_mhz);
    let span = ((s.file.analysis.side_peaks.max_order as f64 + 1.0) * period).ceil() as i64;
    build_correlation(&run.channel(0), &run.channel(1), s.file.analysis.bin_width_ps, span, (0, 1), run.duration_ps)
}

fn tag_artifact(run: &DetectionRun, format: TagFormat, stem: &str) -> Result<Artifact> {
    let mut bytes = Vec::new();
    let ext = match format {
        TagFormat::Binary9 => {
            encode_binary9(&run.tags, &mut bytes)?;
            "bin"
        }
        TagFormat::Csv => {
            encode_csv(&run.tags, &mut bytes)?;
            "csv"
        }
    };
    Ok(Artifact { file_name: format!("{stem}.{ext}"), bytes })
}

/// Runs one scenario end to end: excitation, photon stream, optical chain,
/// instrument and analysis. Deterministic for a given scenario and seed.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput> {
    let f = &s.file;
    let seeds = SeedTree::new(f.seed);
    let prep = s.preparation_probability()?;
    let timing = Timing::from_rate(f.drive.rep_rate_mhz, f.n_triggers);
    let period = timing.period_ps;
    let mut report = Report::default();
    let mut artifacts = Vec::new();

    match f.instrument {
        Instrument::Hbt => {
            let photons = source_photons(s, &seeds, prep, true)?;
            if f.outputs.stream {
                let mut b = Vec::new();
                write_stream_csv(&photons, &mut b)?;
                artifacts.push(Artifact { file_name: "stream.csv".into(), bytes: b });
            }
            let run = hbt(&photons, &s.detectors, &timing, &seeds.child(0xb7))?;
            let h = correlate(&run, s)?;
            let darks = DarkRates { a_hz: s.detectors[0].dark_count_rate_hz, b_hz: s.detectors[1].dark_count_rate_hz };
            let g2 = g2_from_histogram(&h, period, Some(&darks), &f.analysis.side_peaks)?;
            report.g2_zero = Some(g2.g2_zero);
            report.g2_err = Some(g2.g2_err);
            let cr_raw = run.tags.len() as f64 / (run.duration_ps * 1e-12) * 1e-6;
            report.cr_raw_mhz = Some(cr_raw);
            let eta = 0.5 * (s.detectors[0].efficiency + s.detectors[1].efficiency);
            if let Ok(b) = efficiency_budget(cr_raw, eta, g2.g2_zero, f.drive.rep_rate_mhz) {
                report.cr_end_mhz = Some(b.cr_end_mhz);
                report.eta_end = Some(b.eta_end);
            }
            if f.outputs.histograms {
                artifacts.push(Artifact { file_name: "g2_histogram.csv".into(), bytes: histogram_csv(&h)? });
            }
            if let Some(fmt) = f.outputs.tags {
                artifacts.push(tag_artifact(&run, fmt, "tags")?);
            }
        }
        Instrument::Hom => {
            let mut hists = Vec::new();
            for (k, mode) in [HomMode::Parallel, HomMode::Orthogonal].into_iter().enumerate() {
                let run_seeds = seeds.child(0x40 + k as u64);
                let photons = source_photons(s, &run_seeds, prep, true)?;
                let cfg = crate::optics::HomConfig { mode, ..f.hom };
                let run = hom(&photons, &cfg, s.noise.dephasing_ceiling, &s.detectors, &timing, &run_seeds.child(0xb7))?;
                let h = correlate(&run, s)?;
                let stem = if mode == HomMode::Parallel { "hom_parallel" } else { "hom_orthogonal" };
                if f.outputs.histograms {
                    artifacts.push(Artifact { file_name: format!("{stem}.csv"), bytes: histogram_csv(&h)? });
                }
                if let Some(fmt) = f.outputs.tags {
                    artifacts.push(tag_artifact(&run, fmt, &format!("{stem}_tags"))?);
                }
                hists.push(h);
            }
            let v = tpi_visibility(&hists[0], &hists[1], period)?;
            report.v_tpi = Some(v.visibility);
            report.v_err = Some(v.error);
        }
        Instrument::Fpi => {
            let photons = source_photons(s, &seeds, prep, false)?;
            let settings = FpiSettings {
                instrument_fwhm_ghz: f.fpi.instrument_fwhm_ghz,
                axis: s.axis,
                homogeneous_linewidth_ghz: f.emitter.fourier_linewidth_ghz,
                filters: f.chain.filters.clone(),
                seed: seeds.child(0xf9).seed(),
            };
            let spectrum = fpi_scan(&photons, &settings)?;
            let fit = fit_voigt(&spectrum, &s.fit)?;
            report.fwhm_ghz = Some(fit.common_fwhm_ghz);
            if fit.n_peaks == 2 {
                report.splitting_ghz = fit.splitting_ghz;
                report.area_ratio = fit.area_ratio;
            }
            if f.outputs.spectra {
                let mut b = Vec::new();
                write_spectrum_csv(&spectrum, &mut b)?;
                artifacts.push(Artifact { file_name: "spectrum.csv".into(), bytes: b });
            }
        }
    }
    Ok(ScenarioOutput { report, preparation_probability: prep, artifacts })
}
