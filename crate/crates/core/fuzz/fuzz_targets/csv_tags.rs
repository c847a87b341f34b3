#![no_main]

use libfuzzer_sys::fuzz_target;
use qdsps::optics::{decode_csv, encode_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(decoded) = decode_csv(data) else { return };
    let mut bytes = Vec::new();
    encode_csv(&decoded.tags, &mut bytes).unwrap();
    let again = decode_csv(&bytes).unwrap();
    assert_eq!(again.tags, decoded.tags);
    assert_eq!(again.malformed, 0);
});
