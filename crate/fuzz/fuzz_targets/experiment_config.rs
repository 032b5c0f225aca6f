//! Experiment config parsing and validation; the canonical form must parse back unchanged.

#![no_main]

use gibbsfield_cli::config::parse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = parse(text, "fuzz", &[]) {
        // The canonical form must parse back to the same configuration.
        let again = parse(&r.canonical, "canonical", &[]).expect("canonical config parses");
        assert_eq!(r.config, again.config);
        assert_eq!(r.hash, again.hash);
    }
});
