#![no_main]

use crackfem::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(s) {
        // anything accepted must survive a round trip
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).expect("round trip");
        assert_eq!(again.to_toml_string(), cfg.to_toml_string());
        let _ = cfg.resolve();
    }
});
