//! Pattern JSON decoding; decoded patterns must survive an encode/decode round trip.

#![no_main]

use gibbsfield::codec::{pattern_from_json, pattern_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = pattern_from_json(text) {
        let again = pattern_from_json(&pattern_to_json(&p)).expect("re-decode");
        assert_eq!(p, again);
    }
});
