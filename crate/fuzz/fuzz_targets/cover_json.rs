#![no_main]

use hypertree::format::{from_json, to_json, CoverDoc};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = from_json::<CoverDoc>(data) else { return };
    let bytes = to_json(&doc);
    assert_eq!(to_json(&from_json::<CoverDoc>(&bytes).unwrap()), bytes);
    let _ = doc.to_cover();
});
