#![no_main]

use libfuzzer_sys::fuzz_target;
use omnisal::image_io::decode_image;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_image(data) {
        assert!(t.channels() == 1 || t.channels() == 3);
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
