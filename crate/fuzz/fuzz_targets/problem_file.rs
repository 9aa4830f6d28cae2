#![no_main]

use libfuzzer_sys::fuzz_target;

// The problem-file parser must return Ok or Err for any byte input and
// never panic; accepted inputs must also build into a runtime system.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(problem) = renorm_nbody::problem::parse_problem(text) {
            let _ = problem.build::<f64>();
        }
    }
});
