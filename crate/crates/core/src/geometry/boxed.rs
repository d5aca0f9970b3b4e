//! Tensor-grid mesher for the box family: every interface plane is a grid
//! plane and each grid cube is split into six Kuhn tetrahedra, which are
//! conforming across neighbouring cubes.

use std::collections::HashMap;

use super::params::{BoxFamily, GeometryParams};
use super::{tag_facets, MeshMeta, MeshedDomain, RegionTag};
use crate::error::Result;
use crate::simplex::{self, Point};

const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

pub(super) fn build(params: &GeometryParams, fam: &BoxFamily) -> Result<MeshedDomain> {
    let h = params.mesh_size;
    let l = fam.side;
    let c = 0.5 * l;
    let s0 = 0.5 * fam.sigma0_fraction * l;
    let mut xb = vec![0.0, l, c - s0, c + s0];
    for half in [fam.d_half, fam.dprime_half, fam.dtilde_half] {
        xb.push(c - half);
        xb.push(c + half);
    }
    let mut zb = xb.clone();
    zb.retain(|&z| z != c - s0 && z != c + s0);
    zb.push(l + fam.bulge_height);
    let xs = axis(xb, h);
    let zs = axis(zb, h);

    let in_omega = |p: &Point| p.iter().all(|&x| x > 0.0 && x < l);
    let in_attach = |p: &Point| (p[0] - c).abs() < s0 && (p[1] - c).abs() < s0 && p[2] > l && p[2] < l + fam.bulge_height;

    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut cells: Vec<usize> = Vec::new();
    let mut regions: Vec<RegionTag> = Vec::new();
    for i in 0..xs.len() - 1 {
        for j in 0..xs.len() - 1 {
            for k in 0..zs.len() - 1 {
                let centre = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (xs[j] + xs[j + 1]), 0.5 * (zs[k] + zs[k + 1])];
                let region = if in_attach(&centre) {
                    RegionTag::A
                } else if in_omega(&centre) {
                    let cheb = centre.iter().map(|&x| (x - c).abs()).fold(0.0, f64::max);
                    if cheb < fam.d_half {
                        RegionTag::D
                    } else if cheb < fam.dprime_half {
                        RegionTag::DprimeMinusD
                    } else if cheb < fam.dtilde_half {
                        RegionTag::DtildeMinusDprime
                    } else {
                        RegionTag::OmegaMinusDtilde
                    }
                } else {
                    continue;
                };
                for perm in KUHN {
                    let mut corner = [i, j, k];
                    let mut tet = Vec::with_capacity(4);
                    for step in 0..4 {
                        if step > 0 {
                            corner[perm[step - 1]] += 1;
                        }
                        let id = *index.entry(corner).or_insert_with(|| {
                            vertices.push([xs[corner[0]], xs[corner[1]], zs[corner[2]]]);
                            vertices.len() - 1
                        });
                        tet.push(id);
                    }
                    let pts: Vec<Point> = tet.iter().map(|&v| vertices[v]).collect();
                    if simplex::signed_measure(3, &pts) < 0.0 {
                        tet.swap(2, 3);
                    }
                    cells.extend(tet);
                    regions.push(region);
                }
            }
        }
    }

    let in_sigma = |p: &Point| (p[2] - l).abs() < 1e-12 * l.max(1.0);
    let facets = tag_facets(3, &vertices, &cells, &regions, in_sigma);
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
    MeshedDomain::from_parts(3, vertices, cells, regions, facets, meta)
}

/// Sorted grid coordinates containing every breakpoint, with each interval
/// split into equal steps close to `h`.
fn axis(mut breaks: Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = (((w[1] - w[0]) / h).round() as usize).max(1);
        for s in 1..=n {
            out.push(if s == n { w[1] } else { w[0] + (w[1] - w[0]) * s as f64 / n as f64 });
        }
    }
    out
}
