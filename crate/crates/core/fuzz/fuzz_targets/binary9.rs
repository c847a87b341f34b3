#![no_main]

use libfuzzer_sys::fuzz_target;
use qdsps::optics::{decode_binary9, encode_binary9};

fuzz_target!(|data: &[u8]| {
    let Ok(decoded) = decode_binary9(data) else { return };
    let mut bytes = Vec::new();
    encode_binary9(&decoded.tags, &mut bytes).unwrap();
    let again = decode_binary9(&bytes).unwrap();
    assert_eq!(again.tags, decoded.tags);
    assert_eq!(again.malformed, 0);
});
