#![no_main]

use libfuzzer_sys::fuzz_target;
use trajfrac_cli::ConfigDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // accepted documents must survive a serialize/parse round trip
    if let Ok(doc) = ConfigDocument::parse(text) {
        let again = doc.to_toml().expect("serialize");
        assert_eq!(ConfigDocument::parse(&again).expect("reparse"), doc);
    }
});
