#![no_main]

use libfuzzer_sys::fuzz_target;
use pendavg::expr::{parse, EvalEnv};

// The first 40 bytes pick the point, the rest is the expression.
fuzz_target!(|data: &[u8]| {
    if data.len() < 40 {
        return;
    }
    let (head, tail) = data.split_at(40);
    let v: Vec<f64> = head
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let env = EvalEnv::new(v[0], v[1], v[2], v[3], v[4]);
    if let Ok(s) = std::str::from_utf8(tail) {
        if let Ok(e) = parse(s) {
            if let Ok(x) = e.eval(&env) {
                assert!(x.is_finite());
            }
        }
    }
});
