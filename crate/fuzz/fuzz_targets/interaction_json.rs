//! Custom interaction JSON decoding; accepted interactions must be normalized.

#![no_main]

use gibbsfield::model::interaction_from_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(u) = interaction_from_json(text) {
        for t in u.terms() {
            // Shapes are stored sorted and anchored at their smallest site.
            assert!(t.shape()[0].is_zero());
            assert!(t.shape().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(t.table().len(), u.alphabet().pow(t.size() as u32));
        }
        let _ = u.range();
        let _ = u.neighbourhood();
    }
});
