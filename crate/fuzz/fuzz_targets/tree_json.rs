#![no_main]

use hypertree::format::{from_json, to_json, TreeDoc};
use hypertree::graph::generate_example1;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = from_json::<TreeDoc>(data) else { return };
    let bytes = to_json(&doc);
    let again: TreeDoc = from_json(&bytes).expect("re-reads own output");
    assert_eq!(to_json(&again), bytes);
    let g = generate_example1(4).unwrap();
    let _ = doc.to_tree(g.graph());
});
