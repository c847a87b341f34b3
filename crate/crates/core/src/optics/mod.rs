//! Filters, spectrometer and detection chain.

mod detect;
mod filter;
mod fpi;
mod tags;

pub use detect::{hbt, hom, DetectionRun, DetectionStats, DetectorSpec, HomConfig, HomMode, Timing};
pub use filter::{apply_filter, apply_filters, couple_polarized, mode_overlap, stream_width_proxy_ghz, FilterKind, FilterSpec};
pub use fpi::{fpi_lines, fpi_scan, read_spectrum_csv, write_spectrum_csv, FpiSettings, ScanAxis, SpectralLine, Spectrum};
pub use tags::{decode_binary9, decode_csv, encode_binary9, encode_csv, split_channels, DecodedTags, TimeTag, BINARY9_RECORD};

use crate::rng::TRIGGER_BLOCK;
use crate::stream::PhotonRecord;

/// Splits a trigger-sorted photon list into (block index, slice) runs of
/// `TRIGGER_BLOCK` triggers.
pub(crate) fn trigger_blocks(photons: &[PhotonRecord]) -> Vec<(u64, &[PhotonRecord])> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < photons.len() {
        let block = photons[start].trigger_index / TRIGGER_BLOCK;
        let len = photons[start..].partition_point(|p| p.trigger_index / TRIGGER_BLOCK == block);
        out.push((block, &photons[start..start + len]));
        start += len;
    }
    out
}

pub(crate) fn is_trigger_sorted(photons: &[PhotonRecord]) -> bool {
    photons.windows(2).all(|w| w[0].trigger_index <= w[1].trigger_index)
}
