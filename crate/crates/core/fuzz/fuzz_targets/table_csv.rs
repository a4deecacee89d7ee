#![no_main]

use libfuzzer_sys::fuzz_target;
use nhwork::output::Table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = Table::from_csv(text) {
        if let Ok(csv) = table.to_csv() {
            let back = Table::from_csv(&csv).expect("written csv parses");
            assert!(table.same_values(&back));
        }
        let back = Table::from_json(&table.to_json()).expect("written json parses");
        assert!(table.same_values(&back));
    }
});
