//! Configuration-driven end-to-end experiments.

mod config;
mod presets;
mod run;
mod scan;

pub use config::{
    AnalysisSection, ChainSection, DriveSection, Excitation, ExcitationSection, FitSection, FpiSection, Instrument, NoiseChoice,
    NoiseSection, OutputSection, PulseEntry, Scenario, ScenarioFile,
};
pub use presets::{
    verify_paper, Expectation, Metric, PaperPreset, PresetId, PresetSettings, VerifyOptions, VerifyReport, VerifyRow,
    BUDGET_DETECTION_EFFICIENCY, BUDGET_POINTS, BUDGET_REP_RATE_MHZ, BUDGET_TOLERANCE, PRESET_TRIGGERS,
};
pub use run::{run_scenario, Artifact, Report, ScenarioOutput};
pub use scan::{run_scan, Linspace, ScanConfig, ScanOutcome, ScanPulse, ScanSummary, MAX_SCAN_CELLS};
