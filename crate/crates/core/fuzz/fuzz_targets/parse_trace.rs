#![no_main]

use fieldnet::engine::{parse_line, parse_trace, write_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for (i, line) in text.lines().enumerate() {
        let _ = parse_line(line, i + 1);
    }
    if let Ok(trace) = parse_trace(text) {
        let written = write_trace(&trace.records);
        let back = parse_trace(&written).expect("written trace parses");
        assert_eq!(back.records.len(), trace.records.len());
    }
});
