//! Ring mesher for the disk family. Every interface circle is a ring of
//! vertices and consecutive rings are stitched into triangles, so all region
//! and boundary tags are conforming by construction.

use std::f64::consts::{PI, TAU};

use super::params::{DiskFamily, GeometryParams};
use super::{tag_facets, MeshMeta, MeshedDomain, RegionTag};
use crate::error::Result;
use crate::simplex::{self, Point};

struct Ring {
    radius: f64,
    /// (angle, vertex), sorted by angle in [0, 2π). For partial rings the
    /// angles cover the bulge sector only.
    nodes: Vec<(f64, usize)>,
    closed: bool,
}

pub(super) fn build(params: &GeometryParams, fam: &DiskFamily) -> Result<MeshedDomain> {
    let h = params.mesh_size;
    let r = fam.radius;
    let alpha = fam.sigma_half_angle;
    let beta = alpha * fam.sigma0_fraction;
    let (s0_lo, s0_hi) = (PI / 2.0 - beta, PI / 2.0 + beta);

    let mut breaks = vec![0.0, PI / 2.0, PI, 1.5 * PI, wrap(PI / 2.0 - alpha), wrap(PI / 2.0 + alpha), s0_lo, s0_hi];
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let band = fam.band_layers as f64 * h;
    let mut radii: Vec<f64> = Vec::new();
    let push_interval = |radii: &mut Vec<f64>, a: f64, b: f64| {
        let n = (((b - a) / h).round() as usize).max(1);
        for i in 1..=n {
            radii.push(if i == n { b } else { a + (b - a) * i as f64 / n as f64 });
        }
    };
    push_interval(&mut radii, 0.0, fam.r_d);
    push_interval(&mut radii, fam.r_d, fam.r_dprime);
    push_interval(&mut radii, fam.r_dprime, fam.r_dtilde - band);
    let band_start = radii.len();
    for j in 1..=2 * fam.band_layers {
        let k = j as f64 - fam.band_layers as f64;
        radii.push(fam.r_dtilde + k * h);
    }
    let band_end = radii.len();
    push_interval(&mut radii, fam.r_dtilde + band, r);
    let omega_rings = radii.len();
    push_interval(&mut radii, r, fam.bulge_radius);

    let mut vertices: Vec<Point> = vec![[0.0, 0.0, 0.0]];
    let mut ring_of: Vec<usize> = vec![usize::MAX];
    let mut rings: Vec<Ring> = Vec::new();
    let band_angles = ring_angles(&breaks, fam.r_dtilde, h);
    for (k, &rad) in radii.iter().enumerate() {
        // Band rings start at the ring before the band so the inner band
        // boundary matches too.
        let angles = if k + 1 >= band_start && k < band_end { band_angles.clone() } else { ring_angles(&breaks, rad, h) };
        let closed = k < omega_rings;
        let mut nodes = Vec::new();
        for &t in &angles {
            if !closed && !(t >= s0_lo - 1e-12 && t <= s0_hi + 1e-12) {
                continue;
            }
            nodes.push((t, vertices.len()));
            vertices.push([rad * t.cos(), rad * t.sin(), 0.0]);
            ring_of.push(k);
        }
        rings.push(Ring { radius: rad, nodes, closed });
    }

    let mut cells: Vec<usize> = Vec::new();
    let tri = |cells: &mut Vec<usize>, a: usize, b: usize, c: usize| {
        let area = simplex::signed_measure(2, &[vertices[a], vertices[b], vertices[c]]);
        if area > 0.0 {
            cells.extend([a, b, c]);
        } else {
            cells.extend([a, c, b]);
        }
    };
    let first = &rings[0];
    for i in 0..first.nodes.len() {
        let j = (i + 1) % first.nodes.len();
        tri(&mut cells, 0, first.nodes[i].1, first.nodes[j].1);
    }
    for k in 0..rings.len() - 1 {
        let (inner, outer) = (&rings[k], &rings[k + 1]);
        let (a, b) = if outer.closed {
            (closed_sequence(&inner.nodes), closed_sequence(&outer.nodes))
        } else {
            let lo = outer.nodes[0].0;
            let hi = outer.nodes.last().unwrap().0;
            let a: Vec<(f64, usize)> =
                inner.nodes.iter().copied().filter(|&(t, _)| t >= lo - 1e-12 && t <= hi + 1e-12).collect();
            (a, outer.nodes.clone())
        };
        for [p, q, s] in stitch(&a, &b) {
            tri(&mut cells, p, q, s);
        }
    }

    let interfaces = [fam.r_d, fam.r_dprime, fam.r_dtilde, r];
    let regions: Vec<RegionTag> = cells
        .chunks(3)
        .map(|t| {
            let rs: Vec<f64> = t.iter().map(|&v| if v == 0 { 0.0 } else { rings[ring_of[v]].radius }).collect();
            let mid = 0.5 * (rs.iter().cloned().fold(f64::INFINITY, f64::min) + rs.iter().cloned().fold(0.0, f64::max));
            if mid < interfaces[0] {
                RegionTag::D
            } else if mid < interfaces[1] {
                RegionTag::DprimeMinusD
            } else if mid < interfaces[2] {
                RegionTag::DtildeMinusDprime
            } else if mid < interfaces[3] {
                RegionTag::OmegaMinusDtilde
            } else {
                RegionTag::A
            }
        })
        .collect();

    let in_sigma = |p: &Point| {
        let t = p[1].atan2(p[0]);
        angle_between(t, PI / 2.0) < alpha
    };
    let facets = tag_facets(2, &vertices, &cells, &regions, in_sigma);
    let meta = MeshMeta {
        rho0: params.rho0,
        m0: params.m0,
        d0: params.d0,
        rho1: params.rho1,
        rho2: params.rho2,
        h1: params.h1,
        mesh_size: h,
        diam_omega: params.diam_omega,
        q: fam.q(),
    };
    MeshedDomain::from_parts(2, vertices, cells, regions, facets, meta)
}

fn wrap(t: f64) -> f64 {
    t.rem_euclid(TAU)
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Angles of one ring: every breakpoint, with each arc between consecutive
/// breakpoints split into equal pieces of length close to `h`.
fn ring_angles(breaks: &[f64], radius: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, &a) in breaks.iter().enumerate() {
        let b = if i + 1 < breaks.len() { breaks[i + 1] } else { TAU };
        let m = ((radius * (b - a) / h).round() as usize).max(1);
        for j in 0..m {
            out.push(a + (b - a) * j as f64 / m as f64);
        }
    }
    out
}

/// A closed ring as an open sequence from angle 0 back to angle 2π.
fn closed_sequence(nodes: &[(f64, usize)]) -> Vec<(f64, usize)> {
    let mut seq = nodes.to_vec();
    seq.push((TAU, nodes[0].1));
    seq
}

/// Triangulates the strip between two angle-sorted vertex sequences that
/// share their first and last angles, always advancing along the sequence
/// whose next vertex comes first.
fn stitch(inner: &[(f64, usize)], outer: &[(f64, usize)]) -> Vec<[usize; 3]> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(inner.len() + outer.len());
    while i + 1 < inner.len() || j + 1 < outer.len() {
        let advance_inner = if i + 1 == inner.len() {
            false
        } else if j + 1 == outer.len() {
            true
        } else {
            inner[i + 1].0 <= outer[j + 1].0
        };
        if advance_inner {
            out.push([inner[i].1, outer[j].1, inner[i + 1].1]);
            i += 1;
        } else {
            out.push([inner[i].1, outer[j].1, outer[j + 1].1]);
            j += 1;
        }
    }
    out
}
