#![allow(dead_code)]

use std::path::PathBuf;

use chrum_core::{parse_properties, PropertySet};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn classifier_properties() -> PropertySet {
    parse_properties(&fixture("classifier.properties")).expect("fixture properties parse")
}

/// The fixture properties with every multivalued key reduced to its first value.
pub fn first_combination() -> PropertySet {
    let props = classifier_properties();
    let mut flat = PropertySet::new();
    for (k, v) in props.singles() {
        flat.set_single(k, v);
    }
    for (k, values) in props.multis() {
        flat.set_single(k, values[0].as_str());
    }
    flat
}
