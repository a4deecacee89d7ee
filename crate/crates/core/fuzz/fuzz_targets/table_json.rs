#![no_main]

use libfuzzer_sys::fuzz_target;
use nhwork::output::Table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = Table::from_json(text) {
        let back = Table::from_json(&table.to_json()).expect("written json parses");
        assert!(table.same_values(&back));
    }
});
