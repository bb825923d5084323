#![no_main]

use hypertree_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ExperimentConfig::from_json(data) {
        let bytes = cfg.to_json();
        let again = ExperimentConfig::from_json(&bytes).expect("re-reads own output");
        assert_eq!(again.hash(), cfg.hash());
    }
});
