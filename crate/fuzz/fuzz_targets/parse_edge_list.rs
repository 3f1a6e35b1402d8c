#![no_main]

use libfuzzer_sys::fuzz_target;
use rgnn::graph::parse_edge_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_edge_list(text) {
            // a parsed graph must survive its own serialization
            let again = parse_edge_list(&g.to_edge_list()).expect("round trip");
            assert_eq!(again.edge_count(), g.edge_count());
        }
    }
});
