#![no_main]

use std::sync::OnceLock;

use eitlab::conductivity::{load_field, parse_field};
use eitlab::geometry::io::load_mesh;
use eitlab::geometry::MeshedDomain;
use libfuzzer_sys::fuzz_target;

fn hexagon() -> &'static MeshedDomain {
    static MESH: OnceLock<MeshedDomain> = OnceLock::new();
    MESH.get_or_init(|| load_mesh(include_str!("../corpus/mesh_text/hexagon.txt")).expect("seed mesh loads"))
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dump) = parse_field(text) {
        if dump.values.len() == hexagon().n_vertices() {
            let _ = load_field(hexagon(), text);
        }
    }
});
