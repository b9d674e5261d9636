//! The dataset text parser must never panic, and parsing followed by
//! re-rendering must normalize to a fixed point (second render equals the
//! first, since rendered numbers reparse exactly).

#![no_main]

use contagion_core::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = Dataset::from_text(text, "fuzz-input") {
        let rendered = parsed.to_text().expect("accepted dataset must render");
        let reparsed = Dataset::from_text(&rendered, "fuzz-roundtrip")
            .expect("rendered dataset must reparse");
        assert_eq!(
            rendered,
            reparsed.to_text().expect("reparsed dataset must render"),
            "rendering must be a fixed point"
        );
    }
});
