use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::conductivity::{make_reference, perturb_in_d, Bump, BumpShape, ConductivityField, Profile};
use crate::dtn::{assemble_local_dtn, DtnConfig};
use crate::geometry::{build_domain, BoundaryTag, GeometryParams};

struct Fixture {
    mesh: MeshedDomain,
    g0: ConductivityField,
    g1: ConductivityField,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let mesh = build_domain(&GeometryParams::default_disk()).unwrap();
        let g0 = make_reference(&mesh, Profile::SmoothRamp { from: 1.0, to: 1.5 }, 0.4, 500.0).unwrap();
        let bump = Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 };
        let (g1, _) = perturb_in_d(&mesh, &g0, &bump, 0.3).unwrap();
        Fixture { mesh, g0, g1 }
    })
}

fn kernel(f: &Fixture) -> SKernel<'_> {
    SKernel::new(&f.mesh, f.g1.values(), f.g0.values(), SolverConfig::default(), 1).unwrap()
}

fn ball_points(f: &Fixture, n: usize, seed: u64) -> Vec<Point> {
    let meta = f.mesh.meta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = 0.9 * meta.rho1 * rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            [meta.q[0] + r * t.cos(), meta.q[1] + r * t.sin(), 0.0]
        })
        .collect()
}

#[test]
fn equal_conductivities_give_a_zero_kernel() {
    let f = fixture();
    let k = SKernel::new(&f.mesh, f.g0.values(), f.g0.values(), SolverConfig::default(), 1).unwrap();
    assert_eq!(k.s_direct(&[0.0, 0.9, 0.0], &[0.5, 0.0, 0.0]).unwrap(), 0.0);
    let surface = f.mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap();
    let sample = k.s_normal_derivatives(&surface[..6], SKernel::default_step(&f.mesh)).unwrap();
    assert_eq!(sample.sup(), 0.0);
    assert_eq!(sample.d2s_dnu_z_dnu_w.unwrap().amax(), 0.0);
    let report = k.elliptic_residual(f.g0.values(), &[0.0, 1.3, 0.0], Variable::Z).unwrap();
    assert_eq!(report.max_abs, 0.0);
}

#[test]
fn exchanging_sources_and_conductivities_flips_the_sign() {
    let f = fixture();
    let k12 = kernel(f);
    let k21 = SKernel::new(&f.mesh, f.g0.values(), f.g1.values(), SolverConfig::default(), 2).unwrap();
    let pts: [Point; 4] = [[0.0, 0.9, 0.0], [0.45, -0.3, 0.0], [-0.7, 0.1, 0.0], [0.1, 1.35, 0.0]];
    for z in &pts {
        for w in &pts {
            let a = k12.s_direct(z, w).unwrap();
            let b = k21.s_direct(w, z).unwrap();
            assert!((a + b).abs() <= 10.0 * SolverConfig::default().tol * a.abs().max(1e-14), "{a} vs {b}");
        }
    }
}

#[test]
fn sources_in_the_closure_of_d_are_rejected() {
    let f = fixture();
    let k = kernel(f);
    assert!(matches!(k.s_direct(&[0.05, 0.0, 0.0], &[0.0, 0.9, 0.0]), Err(Error::Point(_))));
    assert!(matches!(k.s_direct(&[0.0, 0.9, 0.0], &[0.0, 0.2, 0.0]), Err(Error::Point(_))));
}

#[test]
fn kernel_decays_as_the_sources_recede_from_d() {
    let f = fixture();
    let k = kernel(f);
    let mut last = f64::INFINITY;
    for r in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let p = [r * 0.6, r * 0.8, 0.0];
        let s = k.s_direct(&p, &p).unwrap().abs();
        assert!(s < last, "|S| = {s} at r = {r}");
        last = s;
    }
}

#[test]
fn pairing_reproduces_the_direct_kernel() {
    let f = fixture();
    let k = kernel(f);
    let a1 = assemble_local_dtn(&f.mesh, f.g1.values(), SolverConfig::default(), DtnConfig::default(), 1).unwrap();
    let a2 = assemble_local_dtn(&f.mesh, f.g0.values(), SolverConfig::default(), DtnConfig::default(), 1).unwrap();
    let gap = a1.minus(&a2).unwrap();
    let eps = gap.norm().unwrap();
    let zs = ball_points(f, 5, 1);
    let ws = ball_points(f, 5, 2);
    for (z, w) in zs.iter().zip(&ws) {
        let direct = k.s_direct(z, w).unwrap();
        let paired = k.s_via_pairing(z, w, &gap).unwrap();
        assert!((direct - paired).abs() <= 1e-8 * direct.abs().max(1e-14), "{direct} vs {paired}");
        let (t1, t2) = k.traces(z, w).unwrap();
        assert!(paired.abs() <= eps * gap.half_norm(&t1) * gap.half_norm(&t2) * (1.0 + 1e-12));
    }
    let direct = k.sample(&zs, &ws, KernelMethod::Direct, None).unwrap();
    let paired = k.sample(&zs, &ws, KernelMethod::Pairing, Some(&gap)).unwrap();
    assert!((&direct.values - &paired.values).amax() <= 1e-8 * direct.sup());
}

#[test]
fn pairing_needs_sources_in_the_ball() {
    let f = fixture();
    let k = kernel(f);
    let a = assemble_local_dtn(&f.mesh, f.g0.values(), SolverConfig::default(), DtnConfig::default(), 1).unwrap();
    let far = [0.0, 1.05, 0.0];
    assert!(matches!(k.s_via_pairing(&far, &f.mesh.meta().q, &a), Err(Error::Point(_))));
}

#[test]
fn frozen_green_kernel_is_linear_in_the_amplitude() {
    let f = fixture();
    let bump = Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 };
    let (z, w) = ([0.1, 0.8, 0.0], [-0.5, -0.5, 0.0]);
    let green = GreenSolver::new(&f.mesh, f.g0.values(), SolverConfig::default()).unwrap();
    let gz = green.at_point(&f.mesh, &z).unwrap();
    let gw = green.at_point(&f.mesh, &w).unwrap();
    let frozen = |t: f64| {
        let (g, _) = perturb_in_d(&f.mesh, &f.g0, &bump, t).unwrap();
        let k = assemble(&f.mesh, &g.difference(&f.g0), &f.mesh.cells_in(RegionSet::D)).unwrap();
        k.bilinear(&gz.values, &gw.values)
    };
    let (s1, s2) = (frozen(0.1), frozen(0.2));
    assert!(s1 != 0.0);
    assert!((s2 - 2.0 * s1).abs() <= 1e-12 * s2.abs());
}

#[test]
fn adjoint_field_matches_pointwise_kernel() {
    let f = fixture();
    let k = kernel(f);
    let w = [0.02, 1.28, 0.0];
    let field = k.field(&w, Variable::Z).unwrap();
    let exchanged = k.field(&[0.3, 0.5, 0.0], Variable::W).unwrap();
    let wn = k.snap(&w).unwrap();
    for z in [[0.3, 0.5, 0.0], [-0.8, 0.0, 0.0], [0.0, 1.2, 0.0]] {
        let zn = k.snap(&z).unwrap();
        let s = k.s_direct_nodes(zn, wn).unwrap();
        assert!((field[zn] - s).abs() <= 1e-9 * s.abs(), "{} vs {s}", field[zn]);
    }
    let zn = k.snap(&[0.3, 0.5, 0.0]).unwrap();
    let s = k.s_direct_nodes(zn, wn).unwrap();
    assert!((exchanged[wn] - s).abs() <= 1e-9 * s.abs());
}

#[test]
fn kernel_is_discretely_harmonic_in_each_variable_off_d() {
    let f = fixture();
    let k = kernel(f);
    let tol = SolverConfig::default().tol;
    for variable in [Variable::Z, Variable::W] {
        let r = k.elliptic_residual(f.g0.values(), &[0.05, 1.3, 0.0], variable).unwrap();
        assert!(r.rows > 1000);
        assert!(r.max_relative <= 100.0 * tol, "{variable:?}: {r:?}");
    }
}

#[test]
fn normal_derivatives_on_the_default_mesh() {
    let f = fixture();
    let k = kernel(f);
    let k21 = SKernel::new(&f.mesh, f.g0.values(), f.g1.values(), SolverConfig::default(), 1).unwrap();
    let surface = f.mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap();
    let step = SKernel::default_step(&f.mesh);
    assert!((step - 0.04).abs() < 1e-12);
    let a = k.s_normal_derivatives(&surface, step).unwrap();
    let b = k21.s_normal_derivatives(&surface, step).unwrap();
    assert!(a.rejected.is_empty());
    assert_eq!(a.z_nodes.len(), surface.len());
    let (d12, d21) = (a.d2s_dnu_z_dnu_w.as_ref().unwrap(), b.d2s_dnu_z_dnu_w.as_ref().unwrap());
    assert!((d12 + d21.transpose()).amax() <= 1e-9 * d12.amax());
    let (dz, dw) = (a.ds_dnu_z.as_ref().unwrap(), a.ds_dnu_w.as_ref().unwrap());
    let dw21 = b.ds_dnu_z.as_ref().unwrap();
    assert!((dw + dw21.transpose()).amax() <= 1e-9 * dw.amax());
    assert!(dz.amax() > 0.0);
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), 1 + surface.len() * surface.len());
    assert!(csv.starts_with("z_index,w_index,"));
}

#[test]
fn differencing_step_is_range_checked() {
    let f = fixture();
    let k = kernel(f);
    let surface = f.mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap();
    assert!(k.s_normal_derivatives(&surface, 0.02).is_err());
    assert!(k.s_normal_derivatives(&surface, 0.1).is_err());
}

#[test]
fn stencils_reaching_into_dprime_are_rejected() {
    let f = fixture();
    let k = kernel(f);
    // Nodes of ∂D′ sit on the excluded set itself.
    let surface = f.mesh.nodal_surface_quadrature(BoundaryTag::DDprime).unwrap();
    let step = SKernel::default_step(&f.mesh);
    assert!(k.s_normal_derivatives(&surface, step).is_err());
}

#[test]
fn halving_the_step_on_a_fine_mesh_changes_second_derivatives_little() {
    let mut params = GeometryParams::default_disk();
    params.mesh_size = 0.01;
    let mesh = build_domain(&params).unwrap();
    let g0 = make_reference(&mesh, Profile::SmoothRamp { from: 1.0, to: 1.5 }, 0.4, 500.0).unwrap();
    let bump = Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 };
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump, 0.3).unwrap();
    let k = SKernel::new(&mesh, g1.values(), g0.values(), SolverConfig::default(), 1).unwrap();
    let surface: Vec<NodalPoint> =
        mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap().into_iter().step_by(12).collect();
    let coarse = k.s_normal_derivatives(&surface, 0.04).unwrap();
    let fine = k.s_normal_derivatives(&surface, 0.02).unwrap();
    let (c, f) = (coarse.d2s_dnu_z_dnu_w.unwrap(), fine.d2s_dnu_z_dnu_w.unwrap());
    let change = (&c - &f).amax() / f.amax();
    assert!(change <= 0.25, "relative change {change}");
}
