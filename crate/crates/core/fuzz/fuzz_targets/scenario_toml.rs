#![no_main]

use libfuzzer_sys::fuzz_target;
use qdsps::scenario::{ScanConfig, ScenarioFile};

fuzz_target!(|text: &str| {
    if let Ok(file) = ScenarioFile::from_toml(text) {
        // Compare serialized forms so NaN fields still round-trip.
        let once = file.to_toml();
        let back = ScenarioFile::from_toml(&once).expect("serialized scenario parses");
        assert_eq!(back.to_toml(), once);
        let _ = file.validate();
    }
    if let Ok(scan) = ScanConfig::from_toml(text) {
        let _ = scan.validate();
    }
});
