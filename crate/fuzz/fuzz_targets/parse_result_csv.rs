#![no_main]

use libfuzzer_sys::fuzz_target;
use tvgp::harness::ResultTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ResultTable::parse_csv(text) {
        let written = table.to_csv();
        let again = ResultTable::parse_csv(&written).expect("written table parses");
        assert_eq!(again.to_csv(), written);
    }
});
