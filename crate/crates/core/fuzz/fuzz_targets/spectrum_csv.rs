#![no_main]

use libfuzzer_sys::fuzz_target;
use qdsps::optics::{read_spectrum_csv, write_spectrum_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(spectrum) = read_spectrum_csv(data) else { return };
    let mut bytes = Vec::new();
    write_spectrum_csv(&spectrum, &mut bytes).unwrap();
    assert_eq!(read_spectrum_csv(bytes.as_slice()).unwrap(), spectrum);
});
