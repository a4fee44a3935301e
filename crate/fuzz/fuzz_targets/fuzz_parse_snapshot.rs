#![no_main]

use libfuzzer_sys::fuzz_target;
use taxilim::snapshot::{compare, parse_snapshot};

// The snapshot reader must never panic; anything it accepts must carry a
// consistent grid/column layout, witnessed by a clean self-comparison.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(snap) = parse_snapshot(text) {
        let report = compare(&snap, &snap).expect("self comparison");
        assert_eq!(report.max_abs_diff(), 0.0);
    }
});
