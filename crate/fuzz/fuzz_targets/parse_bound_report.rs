#![no_main]

use libfuzzer_sys::fuzz_target;
use rgnn::cli::{parse_bound_csv, recheck_records};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_bound_csv(text) {
        let _ = recheck_records(&records);
    }
});
