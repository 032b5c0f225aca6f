//! Pattern text decoding; decoded patterns must survive an encode/decode round trip.

#![no_main]

use gibbsfield::codec::{pattern_from_text, pattern_to_text};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = pattern_from_text(text) {
        let again = pattern_from_text(&pattern_to_text(&p)).expect("re-decode");
        assert_eq!(p, again);
    }
});
