//! Plain-text mesh dump, one record per line:
//!
//! ```text
//! eitlab-mesh 1
//! dim <2|3>
//! meta <rho0|m0|d0|rho1|rho2|h1|mesh_size|diam_omega> <value>
//! q <x> <y> <z>
//! vertex <x> <y> <z>
//! cell <region-tag> <v0> ... <v_dim>
//! facet <boundary-tag> <v0> ... <v_dim-1>
//! ```
//!
//! Vertices are numbered from zero in order of appearance. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{BoundaryTag, MeshMeta, MeshedDomain, RegionTag, TaggedFacet};
use crate::error::{Error, Result};
use crate::textio::{arity, expect_header, f64_at, push_record, records, usize_at};

const MAGIC: &str = "eitlab-mesh";
const VERSION: &str = "1";

pub fn dump_mesh(mesh: &MeshedDomain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "dim {}", mesh.dim());
    let m = mesh.meta();
    for (k, v) in [
        ("rho0", m.rho0),
        ("m0", m.m0),
        ("d0", m.d0),
        ("rho1", m.rho1),
        ("rho2", m.rho2),
        ("h1", m.h1),
        ("mesh_size", m.mesh_size),
        ("diam_omega", m.diam_omega),
    ] {
        push_record(&mut out, &format!("meta {k}"), [v]);
    }
    push_record(&mut out, "q", m.q);
    for p in mesh.vertices() {
        push_record(&mut out, "vertex", *p);
    }
    for c in 0..mesh.n_cells() {
        let _ = write!(out, "cell {}", mesh.region(c));
        for v in mesh.cell(c) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    for f in 0..mesh.facets().len() {
        let _ = write!(out, "facet {}", mesh.facets()[f].tag);
        for v in mesh.facet_verts(f) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn load_mesh(text: &str) -> Result<MeshedDomain> {
    let mut recs = records(text);
    expect_header(&mut recs, MAGIC, VERSION)?;
    let mut dim: Option<usize> = None;
    let mut meta = MeshMeta {
        rho0: f64::NAN,
        m0: f64::NAN,
        d0: f64::NAN,
        rho1: f64::NAN,
        rho2: f64::NAN,
        h1: f64::NAN,
        mesh_size: f64::NAN,
        diam_omega: f64::NAN,
        q: [f64::NAN; 3],
    };
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    let mut facets = Vec::new();
    for (line, toks) in recs {
        let need_dim = || dim.ok_or_else(|| Error::parse(line, "`dim` must precede cells and facets"));
        match toks[0] {
            "dim" => {
                arity(&toks, 2, line)?;
                let d = usize_at(&toks, 1, line)?;
                if d != 2 && d != 3 {
                    return Err(Error::parse(line, format!("unsupported dimension {d}")));
                }
                if dim.replace(d).is_some() {
                    return Err(Error::parse(line, "duplicate `dim`"));
                }
            }
            "meta" => {
                arity(&toks, 3, line)?;
                let v = f64_at(&toks, 2, line)?;
                let slot = match toks[1] {
                    "rho0" => &mut meta.rho0,
                    "m0" => &mut meta.m0,
                    "d0" => &mut meta.d0,
                    "rho1" => &mut meta.rho1,
                    "rho2" => &mut meta.rho2,
                    "h1" => &mut meta.h1,
                    "mesh_size" => &mut meta.mesh_size,
                    "diam_omega" => &mut meta.diam_omega,
                    other => return Err(Error::parse(line, format!("unknown meta key `{other}`"))),
                };
                *slot = v;
            }
            "q" => {
                arity(&toks, 4, line)?;
                meta.q = [f64_at(&toks, 1, line)?, f64_at(&toks, 2, line)?, f64_at(&toks, 3, line)?];
            }
            "vertex" => {
                arity(&toks, 4, line)?;
                vertices.push([f64_at(&toks, 1, line)?, f64_at(&toks, 2, line)?, f64_at(&toks, 3, line)?]);
            }
            "cell" => {
                let d = need_dim()?;
                arity(&toks, d + 3, line)?;
                let tag = RegionTag::parse(toks[1]).ok_or_else(|| Error::parse(line, format!("unknown region `{}`", toks[1])))?;
                regions.push(tag);
                for i in 0..=d {
                    cells.push(usize_at(&toks, i + 2, line)?);
                }
            }
            "facet" => {
                let d = need_dim()?;
                arity(&toks, d + 2, line)?;
                let tag =
                    BoundaryTag::parse(toks[1]).ok_or_else(|| Error::parse(line, format!("unknown boundary `{}`", toks[1])))?;
                let mut verts = [usize::MAX; 3];
                for i in 0..d {
                    verts[i] = usize_at(&toks, i + 2, line)?;
                }
                verts[..d].sort_unstable();
                facets.push(TaggedFacet { verts, tag });
            }
            other => return Err(Error::parse(line, format!("unknown record `{other}`"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(0, "missing `dim`"))?;
    let scalars = [meta.rho0, meta.m0, meta.d0, meta.rho1, meta.rho2, meta.h1, meta.mesh_size, meta.diam_omega];
    if scalars.iter().chain(&meta.q).any(|v| v.is_nan()) {
        return Err(Error::parse(0, "missing meta or q record"));
    }
    if !(meta.mesh_size > 0.0) {
        return Err(Error::parse(0, "mesh_size must be positive"));
    }
    MeshedDomain::from_parts(dim, vertices, cells, regions, facets, meta)
}
