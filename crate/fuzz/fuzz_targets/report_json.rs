#![no_main]

use hypertree::format::{from_json, to_json, DeltaDoc, DimensionDoc, Document, GeodeticDoc, VisualDoc};
use hypertree_cli::pipeline::SummaryDoc;
use libfuzzer_sys::fuzz_target;

fn check<T: Document>(data: &[u8]) {
    if let Ok(doc) = from_json::<T>(data) {
        let bytes = to_json(&doc);
        assert_eq!(to_json(&from_json::<T>(&bytes).unwrap()), bytes);
    }
}

fuzz_target!(|data: &[u8]| {
    check::<DeltaDoc>(data);
    check::<VisualDoc>(data);
    check::<DimensionDoc>(data);
    check::<GeodeticDoc>(data);
    check::<SummaryDoc>(data);
});
