#![no_main]

use hypertree::format::{from_json, to_json, CellsDoc};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = from_json::<CellsDoc>(data) else { return };
    let bytes = to_json(&doc);
    assert_eq!(to_json(&from_json::<CellsDoc>(&bytes).unwrap()), bytes);
    if let Ok(cells) = doc.to_cells() {
        assert_eq!(cells.len(), doc.cells.len());
    }
});
