#![no_main]

use libfuzzer_sys::fuzz_target;
use omnisal::tensor::{decode_omt, encode_omt};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_omt(data) {
        // Accepted input is canonical: re-encoding reproduces it byte for byte.
        assert_eq!(encode_omt(&t), data);
    }
});
