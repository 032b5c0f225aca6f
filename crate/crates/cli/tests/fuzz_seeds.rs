//! The checked-in fuzz corpus seeds must stay valid inputs.

use std::fs;
use std::path::Path;

use gibbsfield::{codec, model};
use gibbsfield_cli::config;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn every_seed_decodes() {
    for (name, text) in seeds("pattern_text") {
        codec::pattern_from_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("pattern_json") {
        codec::pattern_from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("configuration_text") {
        codec::configuration_from_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("configuration_json") {
        codec::configuration_from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("interaction_json") {
        model::interaction_from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, text) in seeds("experiment_config") {
        config::parse(&text, &name, &[]).unwrap_or_else(|e| panic!("{e}"));
    }
}
