use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_trigger_sorted, mode_overlap, trigger_blocks, TimeTag};
use crate::rng::{Purpose, SeedTree, TRIGGER_BLOCK};
use crate::stream::PhotonRecord;
use crate::units::{gaussian_sigma_from_fwhm, rep_period_ps};
use crate::{Error, Result};

/// Single-photon detector. Defaults are typical SNSPD values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub timing_jitter_fwhm_ps: f64,
    pub dead_time_ns: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self { efficiency: 0.768, dark_count_rate_hz: 100.0, timing_jitter_fwhm_ps: 50.0, dead_time_ns: 20.0 }
    }
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        Self { efficiency: 1.0, dark_count_rate_hz: 0.0, timing_jitter_fwhm_ps: 0.0, dead_time_ns: 0.0 }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(format!("{path}.efficiency"), "must lie in [0, 1]"));
        }
        for (k, v) in [
            ("dark_count_rate_hz", self.dark_count_rate_hz),
            ("timing_jitter_fwhm_ps", self.timing_jitter_fwhm_ps),
            ("dead_time_ns", self.dead_time_ns),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{path}.{k}"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Trigger clock. Trigger k fires at (k + 1)·period so that all timestamps
/// are positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub period_ps: f64,
    pub n_triggers: u64,
}

impl Timing {
    pub fn from_rate(repetition_rate_mhz: f64, n_triggers: u64) -> Self {
        Self { period_ps: rep_period_ps(repetition_rate_mhz), n_triggers }
    }

    pub fn trigger_time_ps(&self, k: u64) -> f64 {
        (k + 1) as f64 * self.period_ps
    }

    /// Length of the recorded window.
    pub fn duration_ps(&self) -> f64 {
        (self.n_triggers + 2) as f64 * self.period_ps
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub photons_in: u64,
    /// Photon clicks that survived dead time (tags excluding darks).
    pub detected_photons: u64,
    pub dark_counts: u64,
    pub dead_time_losses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    /// Sorted by (timestamp, channel).
    pub tags: Vec<TimeTag>,
    pub stats: DetectionStats,
    pub duration_ps: f64,
}

impl DetectionRun {
    pub fn channel(&self, ch: u8) -> Vec<i64> {
        self.tags.iter().filter(|t| t.channel == ch).map(|t| t.timestamp_ps).collect()
    }

    /// Click rate of one channel in Hz, all clicks included.
    pub fn rate_hz(&self, ch: u8) -> f64 {
        self.tags.iter().filter(|t| t.channel == ch).count() as f64 / (self.duration_ps * 1e-12)
    }
}

#[derive(Debug, Clone, Copy)]
struct Click {
    t: i64,
    channel: u8,
    dark: bool,
}

fn detect(rng: &mut ChaCha8Rng, det: &DetectorSpec, jitter: Option<&Normal<f64>>, channel: u8, t: f64) -> Option<Click> {
    if rng.random::<f64>() >= det.efficiency {
        return None;
    }
    let j = jitter.map(|n| n.sample(rng)).unwrap_or(0.0);
    Some(Click { t: (t + j).round().max(0.0) as i64, channel, dark: false })
}

fn jitters(dets: &[DetectorSpec; 2]) -> Result<[Option<Normal<f64>>; 2]> {
    let mk = |d: &DetectorSpec| -> Result<Option<Normal<f64>>> {
        if d.timing_jitter_fwhm_ps == 0.0 {
            return Ok(None);
        }
        Normal::new(0.0, gaussian_sigma_from_fwhm(d.timing_jitter_fwhm_ps)).map(Some).map_err(|e| Error::domain(e.to_string()))
    };
    Ok([mk(&dets[0])?, mk(&dets[1])?])
}

/// Adds Poisson dark counts, sorts, and applies non-paralyzable dead time.
fn finish(
    mut clicks: Vec<Click>,
    photons_in: u64,
    dets: &[DetectorSpec; 2],
    timing: &Timing,
    seeds: &SeedTree,
) -> Result<DetectionRun> {
    let duration = timing.duration_ps();
    for (ch, det) in dets.iter().enumerate() {
        if det.dark_count_rate_hz == 0.0 {
            continue;
        }
        let gap = Exp::new(det.dark_count_rate_hz * 1e-12).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = seeds.stream(Purpose::DarkCounts, ch as u64);
        let mut t = gap.sample(&mut rng);
        while t < duration {
            clicks.push(Click { t: t as i64, channel: ch as u8, dark: true });
            t += gap.sample(&mut rng);
        }
    }
    clicks.par_sort_unstable_by_key(|c| (c.t, c.channel, c.dark));

    let mut stats = DetectionStats { photons_in, ..Default::default() };
    let mut last: [Option<i64>; 2] = [None, None];
    let mut tags = Vec::with_capacity(clicks.len());
    for c in clicks {
        let ch = c.channel as usize;
        let dead_ps = (dets[ch].dead_time_ns * 1e3).round() as i64;
        if let Some(prev) = last[ch] {
            if c.t - prev < dead_ps {
                if !c.dark {
                    stats.dead_time_losses += 1;
                }
                continue;
            }
        }
        last[ch] = Some(c.t);
        if c.dark {
            stats.dark_counts += 1;
        } else {
            stats.detected_photons += 1;
        }
        tags.push(TimeTag::new(c.channel, c.t));
    }
    Ok(DetectionRun { tags, stats, duration_ps: duration })
}

fn check_inputs(photons: &[PhotonRecord], dets: &[DetectorSpec; 2], timing: &Timing) -> Result<()> {
    dets[0].validate("detectors[0]")?;
    dets[1].validate("detectors[1]")?;
    if !(timing.period_ps > 0.0) {
        return Err(Error::config("drive.rep_rate_mhz", "must be > 0"));
    }
    if !is_trigger_sorted(photons) {
        return Err(Error::domain("photons must be sorted by trigger index"));
    }
    if photons.last().is_some_and(|p| p.trigger_index >= timing.n_triggers) {
        return Err(Error::domain("photon trigger index beyond the trigger count"));
    }
    Ok(())
}

/// Hanbury Brown–Twiss setup: 50:50 split onto two detectors.
pub fn hbt(photons: &[PhotonRecord], dets: &[DetectorSpec; 2], timing: &Timing, seeds: &SeedTree) -> Result<DetectionRun> {
    check_inputs(photons, dets, timing)?;
    let jit = jitters(dets)?;
    let clicks: Vec<Click> = trigger_blocks(photons)
        .par_iter()
        .flat_map_iter(|(b, chunk)| {
            let mut rng = seeds.stream(Purpose::Routing, *b);
            let mut out = Vec::with_capacity(chunk.len());
            for p in chunk.iter() {
                let ch = usize::from(rng.random::<bool>());
                let t = timing.trigger_time_ps(p.trigger_index) + p.emission_time_ps;
                if let Some(c) = detect(&mut rng, &dets[ch], jit[ch].as_ref(), ch as u8, t) {
                    out.push(c);
                }
            }
            out
        })
        .collect();
    finish(clicks, photons.len() as u64, dets, timing, seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomMode {
    Parallel,
    /// Distinguishable reference: every pair has zero overlap.
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomConfig {
    pub path_delay_ns: f64,
    /// Reflectivity R of the output splitter.
    pub splitter_ratio: f64,
    pub mode: HomMode,
}

impl Default for HomConfig {
    fn default() -> Self {
        Self { path_delay_ns: 6.6, splitter_ratio: 0.5, mode: HomMode::Parallel }
    }
}

impl HomConfig {
    /// Relative mismatch allowed between path delay and trigger period.
    pub const DELAY_TOLERANCE: f64 = 0.01;

    pub fn validate(&self, period_ps: f64) -> Result<()> {
        if !(self.splitter_ratio > 0.0 && self.splitter_ratio < 1.0) {
            return Err(Error::config("hom.splitter_ratio", "must lie in (0, 1)"));
        }
        let delay_ps = self.path_delay_ns * 1e3;
        if !((delay_ps - period_ps).abs() <= Self::DELAY_TOLERANCE * period_ps) {
            return Err(Error::config(
                "hom.path_delay_ns",
                format!("path delay {delay_ps} ps does not match the trigger period {period_ps:.1} ps"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Arrival<'a> {
    photon: &'a PhotonRecord,
    long: bool,
}

/// Unbalanced Mach–Zehnder HOM setup.
///
/// Each photon takes the short or long arm with probability ½; the long arm
/// adds one trigger period (the path delay). Within an output time slot the
/// first short/long pair meets at the output splitter and, with probability
/// equal to their overlap, interferes as indistinguishable photons
/// (coincidence probability (T − R)², otherwise both leave by the same port).
/// All other photons route independently: the short arm reaches channel 0
/// with probability T, the long arm with probability R.
pub fn hom(
    photons: &[PhotonRecord],
    cfg: &HomConfig,
    dephasing_ceiling: f64,
    dets: &[DetectorSpec; 2],
    timing: &Timing,
    seeds: &SeedTree,
) -> Result<DetectionRun> {
    check_inputs(photons, dets, timing)?;
    cfg.validate(timing.period_ps)?;
    if !(0.0..=1.0).contains(&dephasing_ceiling) {
        return Err(Error::config("noise.dephasing_ceiling", "must lie in [0, 1]"));
    }
    let jit = jitters(dets)?;
    let r = cfg.splitter_ratio;
    let t_split = 1.0 - r;
    let p_coinc_indist = (t_split - r) * (t_split - r);
    let delay_ps = cfg.path_delay_ns * 1e3;

    let n_blocks = timing.n_triggers.div_ceil(TRIGGER_BLOCK) + 1;
    let clicks: Vec<Click> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let first_slot = b * TRIGGER_BLOCK;
            let end_slot = first_slot + TRIGGER_BLOCK;
            // Photons that can land in these slots come from triggers
            // [first_slot − 1, end_slot).
            let start_trigger = first_slot.saturating_sub(1);
            let lo = photons.partition_point(|p| p.trigger_index < start_trigger);
            let hi = photons.partition_point(|p| p.trigger_index < end_slot);
            let mut slots: Vec<(u64, Arrival)> = photons[lo..hi]
                .iter()
                .filter_map(|p| {
                    let long = seeds.keyed_unit(Purpose::Interference, p.key()) < 0.5;
                    let slot = p.trigger_index + u64::from(long);
                    (slot >= first_slot && slot < end_slot).then_some((slot, Arrival { photon: p, long }))
                })
                .collect();
            slots.sort_by_key(|(s, _)| *s);

            let mut rng = seeds.stream(Purpose::Routing, b);
            let mut out = Vec::new();
            let mut i = 0;
            while i < slots.len() {
                let slot = slots[i].0;
                let j = i + slots[i..].partition_point(|(s, _)| *s == slot);
                let group = &slots[i..j];
                let short = group.iter().position(|(_, a)| !a.long);
                let long = group.iter().position(|(_, a)| a.long);
                let pair = short.zip(long);

                let mut ports = vec![0u8; group.len()];
                for (k, (_, a)) in group.iter().enumerate() {
                    let to_zero = if a.long { r } else { t_split };
                    ports[k] = u8::from(rng.random::<f64>() >= to_zero);
                }
                if let Some((s, l)) = pair {
                    let overlap = match cfg.mode {
                        HomMode::Parallel => mode_overlap(group[s].1.photon, group[l].1.photon, dephasing_ceiling),
                        HomMode::Orthogonal => 0.0,
                    };
                    // Both modes consume the same draws, so a parallel run
                    // differs from its orthogonal twin only in interfering pairs.
                    let (u, v, first) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<bool>());
                    if u < overlap {
                        if v < p_coinc_indist {
                            ports[s] = u8::from(first);
                            ports[l] = u8::from(!first);
                        } else {
                            ports[s] = u8::from(first);
                            ports[l] = u8::from(first);
                        }
                    }
                }
                for (k, (_, a)) in group.iter().enumerate() {
                    let ch = ports[k];
                    let t = timing.trigger_time_ps(a.photon.trigger_index)
                        + if a.long { delay_ps } else { 0.0 }
                        + a.photon.emission_time_ps;
                    if let Some(c) = detect(&mut rng, &dets[ch as usize], jit[ch as usize].as_ref(), ch, t) {
                        out.push(c);
                    }
                }
                i = j;
            }
            out
        })
        .collect();
    finish(clicks, photons.len() as u64, dets, timing, seeds)
}
