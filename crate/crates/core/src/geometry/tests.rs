use std::f64::consts::PI;

use super::io::{dump_mesh, load_mesh};
use super::*;

fn disk() -> MeshedDomain {
    build_domain(&GeometryParams::default_disk()).unwrap()
}

fn box_params() -> GeometryParams {
    GeometryParams::default_box()
}

#[test]
fn d0_above_rho0_is_rejected_naming_d0() {
    let mut p = GeometryParams::default_disk();
    p.d0 = 0.6;
    p.rho0 = 0.5;
    match build_domain(&p) {
        Err(Error::Geometry { key, reason }) => {
            assert_eq!(key, "d0");
            assert!(reason.contains("size of Sigma"));
        }
        other => panic!("expected geometry error, got {other:?}"),
    }
}

#[test]
fn coarse_mesh_is_rejected() {
    let mut p = GeometryParams::default_disk();
    p.mesh_size = 0.1;
    assert!(matches!(p.validate(), Err(Error::Geometry { key: "mesh_size", .. })));
}

#[test]
fn disk_regions_match_their_definitions() {
    let mesh = disk();
    let Family::Disk(fam) = GeometryParams::default_disk().family else { unreachable!() };
    let h = mesh.meta().mesh_size;
    for c in 0..mesh.n_cells() {
        let b = mesh.barycenter(c);
        let r = (b[0] * b[0] + b[1] * b[1]).sqrt();
        let expected = if r < fam.r_d {
            RegionTag::D
        } else if r < fam.r_dprime {
            RegionTag::DprimeMinusD
        } else if r < fam.r_dtilde {
            RegionTag::DtildeMinusDprime
        } else if r < fam.radius {
            RegionTag::OmegaMinusDtilde
        } else {
            RegionTag::A
        };
        let near_interface =
            [fam.r_d, fam.r_dprime, fam.r_dtilde, fam.radius].iter().any(|&s| (r - s).abs() < 0.5 * h);
        if !near_interface {
            assert_eq!(mesh.region(c), expected, "cell {c} at radius {r}");
        }
        if mesh.region(c) == RegionTag::A {
            let t = b[1].atan2(b[0]);
            assert!((t - PI / 2.0).abs() < fam.sigma_half_angle * fam.sigma0_fraction + 1e-9);
        }
    }
}

#[test]
fn disk_total_area_is_close_to_exact() {
    let mesh = disk();
    let Family::Disk(fam) = GeometryParams::default_disk().family else { unreachable!() };
    let omega = mesh.region_measure(&mesh.cells_in(RegionSet::OMEGA));
    assert!((omega - PI).abs() < 2e-3, "area {omega}");
    let beta = fam.sigma_half_angle * fam.sigma0_fraction;
    let attach = mesh.region_measure(&mesh.cells_in(RegionSet::ATTACHMENT));
    let exact = beta * (fam.bulge_radius.powi(2) - fam.radius.powi(2));
    assert!((attach - exact).abs() < 5e-3, "attachment area {attach} vs {exact}");
}

#[test]
fn box_mesh_has_every_tag() {
    let mesh = build_domain(&box_params()).unwrap();
    assert_eq!(mesh.dim(), 3);
    for tag in BoundaryTag::ALL {
        assert!(!mesh.facets_with(tag).is_empty(), "{tag}");
    }
    for tag in RegionTag::ALL {
        assert!(!mesh.cells_in(RegionSet::of(&[tag])).is_empty(), "{tag}");
    }
    let omega = mesh.region_measure(&mesh.cells_in(RegionSet::OMEGA));
    assert!((omega - 1.0).abs() < 1e-9, "{omega}");
}

#[test]
fn erode_is_empty_or_rejected_for_huge_depth() {
    let mesh = disk();
    let d = mesh.cells_in(RegionSet::D);
    assert!(matches!(mesh.erode(&d, 1.0), Err(Error::EmptyRegion(_))));
    assert!(mesh.erode(&d, 0.0).is_err());
}

#[test]
fn eroded_shell_is_connected_and_contains_the_reference_ball() {
    let mesh = disk();
    let m = *mesh.meta();
    let shell = mesh.cells_in(RegionSet::OUTSIDE_DPRIME);
    let eroded = mesh.erode(&shell, m.h1).unwrap();
    assert_eq!(eroded.components, 1);
    for c in 0..mesh.n_cells() {
        if simplex::dist(&mesh.barycenter(c), &m.q) < m.rho1 {
            assert!(eroded.cells.contains(c), "cell {c} of B(Q, rho1) was eroded");
        }
    }
    assert!(eroded.cells.len() < shell.len());
}

fn meta() -> MeshMeta {
    MeshMeta { rho0: 1.0, m0: 1.0, d0: 1.0, rho1: 0.1, rho2: 0.1, h1: 0.01, mesh_size: 0.1, diam_omega: 2.0, q: [0.0; 3] }
}

/// A fan triangulation of the regular `n`-gon inscribed in the circle of
/// radius `r`, its rim tagged `dD`.
fn polygon(n: usize, r: f64) -> MeshedDomain {
    let mut vertices = vec![[0.0; 3]];
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        vertices.push([r * t.cos(), r * t.sin(), 0.0]);
    }
    let mut cells = Vec::new();
    let mut facets = Vec::new();
    for k in 0..n {
        let (a, b) = (1 + k, 1 + (k + 1) % n);
        cells.extend([0, a, b]);
        facets.push(TaggedFacet { verts: [a.min(b), a.max(b), usize::MAX], tag: BoundaryTag::DD });
    }
    MeshedDomain::from_parts(2, vertices, cells, vec![RegionTag::D; n], facets, meta()).unwrap()
}

#[test]
fn polygon_sampling_weights_sum_to_perimeter() {
    for n in [3, 7, 64] {
        let r = 0.6;
        let mesh = polygon(n, r);
        let pts = mesh.sample_surface(BoundaryTag::DD, 0.005).unwrap();
        let total: f64 = pts.iter().map(|p| p.weight).sum();
        let n = n as f64;
        assert!((total - 2.0 * n * r * (PI / n).sin()).abs() < 1e-10);
        for p in &pts {
            assert!(simplex::dot3(&p.point, &p.normal) > 0.0, "normal must point outward");
        }
    }
}

#[test]
fn unit_square_boundary_weights_sum_to_four() {
    let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let facets = [[0, 1], [1, 2], [2, 3], [0, 3]]
        .iter()
        .map(|e| TaggedFacet { verts: [e[0], e[1], usize::MAX], tag: BoundaryTag::OuterRest })
        .collect();
    let mesh =
        MeshedDomain::from_parts(2, vertices, vec![0, 1, 2, 0, 2, 3], vec![RegionTag::D; 2], facets, meta()).unwrap();
    for spacing in [1.0, 0.3, 0.01] {
        let total: f64 = mesh.sample_surface(BoundaryTag::OuterRest, spacing).unwrap().iter().map(|p| p.weight).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
}

#[test]
fn disk_interface_normals_point_outward() {
    let mesh = disk();
    for p in mesh.sample_surface(BoundaryTag::DDtilde, 0.01).unwrap() {
        let r = simplex::norm3(&p.point);
        assert!(simplex::dot3(&p.point, &p.normal) / r > 0.99);
    }
}

#[test]
fn cube_boundary_weights_sum_to_surface_area() {
    let mesh = build_domain(&box_params()).unwrap();
    let total: f64 = [BoundaryTag::DD]
        .iter()
        .flat_map(|&t| mesh.sample_surface(t, 0.01).unwrap())
        .map(|p| p.weight)
        .sum();
    let Family::Box(fam) = box_params().family else { unreachable!() };
    let side = 2.0 * fam.d_half;
    assert!((total - 6.0 * side * side).abs() < 1e-12);
}

#[test]
fn nodal_quadrature_matches_facet_measure() {
    let mesh = disk();
    let nodal: f64 = mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap().iter().map(|p| p.weight).sum();
    let sampled: f64 = mesh.sample_surface(BoundaryTag::DDtilde, 1.0).unwrap().iter().map(|p| p.weight).sum();
    assert!((nodal - sampled).abs() < 1e-12);
}

#[test]
fn mesh_dump_round_trips() {
    let mesh = disk();
    let text = dump_mesh(&mesh);
    let back = load_mesh(&text).unwrap();
    assert_eq!(back.n_vertices(), mesh.n_vertices());
    assert_eq!(back.n_cells(), mesh.n_cells());
    assert_eq!(back.facets(), mesh.facets());
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.meta(), mesh.meta());
    assert_eq!(dump_mesh(&back), text);
}

#[test]
fn malformed_mesh_text_is_an_error() {
    for text in [
        "",
        "eitlab-mesh 2\n",
        "eitlab-mesh 1\ndim 4\n",
        "eitlab-mesh 1\ncell D 0 1 2\n",
        "eitlab-mesh 1\ndim 2\nvertex 0 0 nan\n",
        "eitlab-mesh 1\ndim 2\nvertex 0 0 0\ncell D 0 1 5\n",
    ] {
        assert!(load_mesh(text).is_err(), "{text:?}");
    }
}
