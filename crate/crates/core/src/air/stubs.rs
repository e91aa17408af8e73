//! Bundled platform library.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::{parse_document, ClassDef};

/// Source text of the bundled platform stubs.
pub const PLATFORM_STUBS: &str = include_str!("stubs.air");

/// Platform classes keyed by name, parsed once.
pub fn platform_stubs() -> &'static BTreeMap<String, ClassDef> {
    static STUBS: OnceLock<BTreeMap<String, ClassDef>> = OnceLock::new();
    STUBS.get_or_init(|| {
        let doc = parse_document(PLATFORM_STUBS, true).expect("bundled stubs parse");
        doc.classes
            .into_iter()
            .map(|c| (c.name.clone(), c))
            .collect()
    })
}
