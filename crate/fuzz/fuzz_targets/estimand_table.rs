//! The estimand table parser must never panic, and parsing followed by
//! re-rendering must normalize to a fixed point (values print at fixed
//! precision, which reparses exactly).

#![no_main]

use contagion_core::table::{parse_table, write_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_table(text, "fuzz-input") {
        let rendered = write_table(&rows);
        let reparsed = parse_table(&rendered, "fuzz-roundtrip")
            .expect("rendered table must reparse");
        assert_eq!(rendered, write_table(&reparsed), "rendering must be a fixed point");
    }
});
