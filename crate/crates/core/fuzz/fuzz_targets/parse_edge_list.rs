#![no_main]

use fieldnet::model::parse_edge_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(list) = parse_edge_list(&text) {
        let _ = list.graph();
    }
});
