//! The estimand request-list parser must never panic, and every accepted
//! request must carry exactly the arguments its kind requires (the
//! parser's own validation contract).

#![no_main]

use contagion_core::table::parse_requests;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(requests) = parse_requests(text, "fuzz-input") {
        for r in &requests {
            r.validate().expect("accepted request must be valid");
        }
    }
});
