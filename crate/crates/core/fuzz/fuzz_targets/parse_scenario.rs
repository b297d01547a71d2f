#![no_main]

use fieldnet::engine::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sc) = Scenario::from_toml(text) {
        let back = Scenario::from_toml(&sc.to_toml()).expect("written scenario loads");
        assert_eq!(back.nodes.len(), sc.nodes.len());
    }
});
