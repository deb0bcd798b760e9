#![no_main]

use libfuzzer_sys::fuzz_target;
use pendavg::expr::parse;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(e) = parse(s) {
            // Whatever parses must print back to something that parses the same way.
            let printed = e.to_string();
            let again = parse(&printed).expect("printed expression reparses");
            assert_eq!(again.to_string(), printed);
        }
    }
});
