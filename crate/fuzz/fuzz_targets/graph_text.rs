#![no_main]

use hypertree::format::{parse_graph, write_graph};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_graph(text) {
        // Accepted input is canonical.
        assert_eq!(write_graph(&g), text);
    }
});
