#![no_main]

use eitlab::dtn::{dump_operator, load_operator};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(op) = load_operator(text) {
        let again = load_operator(&dump_operator(&op)).expect("dump of a loaded operator reloads");
        assert_eq!(again.dofs(), op.dofs());
        // Norms of arbitrary parsed data may fail, but must not panic.
        let _ = op.norm();
    }
});
