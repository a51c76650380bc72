#![no_main]

use libfuzzer_sys::fuzz_target;
use trajfrac_cli::table::{parse_stats, write_stats};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_stats(data) {
        let mut out = Vec::new();
        write_stats(&mut out, &rows).expect("write");
        let again = parse_stats(&out).expect("reparse");
        assert_eq!(again.len(), rows.len());
    }
});
