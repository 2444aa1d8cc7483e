#![no_main]

use libfuzzer_sys::fuzz_target;
use tvgp::harness::SensorDataset;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(dataset) = SensorDataset::parse(text) else { return };
    // Anything accepted must survive a write and re-read unchanged.
    let again = SensorDataset::parse(&dataset.to_csv()).expect("written table parses");
    assert_eq!(again, dataset);
    let _ = dataset.complete_rows(0..dataset.n_rows());
});
