//! Figures of merit from time tags and spectra.

mod budget;
mod correlation;
mod fit;
mod g2;
mod ingest;
mod voigt;

pub use budget::{efficiency_budget, EfficiencyBudget};
pub use correlation::{build_correlation, read_histogram_csv, Histogram};
pub use fit::{fit_voigt, FitOptions, LorentzWidth, VoigtFitResult};
pub use g2::{
    dark_pedestal, g2_from_histogram, peak_area, tpi_visibility, CorrelationResult, DarkRates, SidePeakWindow, VisibilityResult,
};
pub use ingest::{ingest_bytes, ingest_tags, TagFormat, TagStreams};
pub use voigt::{faddeeva, voigt, voigt_fwhm};
