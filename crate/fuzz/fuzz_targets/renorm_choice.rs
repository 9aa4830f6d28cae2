#![no_main]

use libfuzzer_sys::fuzz_target;
use renorm_nbody::renorm::RenormChoice;

fuzz_target!(|data: &[u8]| {
    if let Ok(choice) = serde_json::from_slice::<RenormChoice>(data) {
        let _ = choice.validate();
    }
});
