#![no_main]

use libfuzzer_sys::fuzz_target;
use omnisal::projection::SamplingGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(grid) = SamplingGrid::decode(data) else {
        return;
    };
    let again = SamplingGrid::decode(&grid.encode()).expect("re-encoded grid decodes");
    assert_eq!(again, grid);
});
