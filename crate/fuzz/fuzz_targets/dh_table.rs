#![no_main]

use bodycal::dh::DhTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = DhTable::from_text(text) {
        let back = DhTable::from_text(&table.to_text()).expect("written table parses");
        assert_eq!(back.rows, table.rows);
    }
});
