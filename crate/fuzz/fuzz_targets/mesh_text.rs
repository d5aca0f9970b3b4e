#![no_main]

use eitlab::geometry::io::{dump_mesh, load_mesh};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = load_mesh(text) {
        // Anything accepted must survive a dump and reload unchanged.
        let again = load_mesh(&dump_mesh(&mesh)).expect("dump of a loaded mesh reloads");
        assert_eq!(again.n_vertices(), mesh.n_vertices());
        assert_eq!(again.n_cells(), mesh.n_cells());
    }
});
