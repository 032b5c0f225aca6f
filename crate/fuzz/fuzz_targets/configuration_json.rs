//! Configuration JSON decoding; decoded configurations must survive an encode/decode round trip.

#![no_main]

use gibbsfield::codec::{configuration_from_json, configuration_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = configuration_from_json(text) {
        let again = configuration_from_json(&configuration_to_json(&c)).expect("re-decode");
        assert_eq!(c, again);
    }
});
