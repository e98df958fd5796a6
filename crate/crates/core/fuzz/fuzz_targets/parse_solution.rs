#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_pcrb::robust_opt::{parse_solution, write_solution};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sol) = parse_solution(text) {
        let power = sol.w_star.trace().max(1.0);
        let back = parse_solution(&write_solution(&sol, power)).unwrap();
        assert_eq!(back.t_star.to_bits(), sol.t_star.to_bits());
    }
});
