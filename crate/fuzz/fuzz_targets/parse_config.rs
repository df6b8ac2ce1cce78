#![no_main]

use libfuzzer_sys::fuzz_target;
use omnisal::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
});
