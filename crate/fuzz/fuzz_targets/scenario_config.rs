//! The scenario config parser must reject arbitrary input gracefully:
//! no panics, and anything it accepts must serialize and reparse to an
//! equally valid config.

#![no_main]

use contagion_core::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::parse(text, "fuzz-input") {
        let rendered = cfg.to_toml().expect("accepted config must serialize");
        let reparsed = ScenarioConfig::parse(&rendered, "fuzz-roundtrip")
            .expect("rendered config must reparse");
        assert_eq!(
            rendered,
            reparsed.to_toml().expect("reparsed config must serialize"),
            "rendering must be a fixed point"
        );
    }
});
