use std::f64::consts::PI;
use std::sync::OnceLock;

use super::*;
use crate::conductivity::{make_reference, BumpShape, Profile};
use crate::geometry::{build_domain, GeometryParams};

struct Fixture {
    mesh: MeshedDomain,
    g0: ConductivityField,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let mesh = build_domain(&GeometryParams::default_disk()).unwrap();
        let g0 = make_reference(&mesh, Profile::SmoothRamp { from: 1.0, to: 1.5 }, 0.4, 500.0).unwrap();
        Fixture { mesh, g0 }
    })
}

fn bump() -> Bump {
    Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 }
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn fourier_modes_on_a_circle_are_trigonometric() {
    let f = fixture();
    let dofs = f.mesh.nodes_on(&[BoundaryTag::DDtilde]);
    let c3 = fourier_mode(&f.mesh, &dofs, 3, false);
    let s2 = fourier_mode(&f.mesh, &dofs, 2, true);
    for (k, &v) in dofs.iter().enumerate() {
        let p = f.mesh.vertex(v);
        let t = p[1].atan2(p[0]);
        // The ring is not uniform, so its vertex centroid is slightly off the origin.
        assert!((c3[k] - (3.0 * t).cos()).abs() < 3e-2);
        assert!((s2[k] - (2.0 * t).sin()).abs() < 3e-2);
    }
}

#[test]
fn equal_conductivities_reconstruct_zero() {
    let f = fixture();
    let setup = GapSetup::new(&f.mesh, f.g0.values(), f.g0.values(), cfg(), DtnConfig::default(), 1).unwrap();
    let dofs = setup.full1.dofs().to_vec();
    let (e1, e2) = standard_data_pairs(&f.mesh, &dofs).swap_remove(0);
    let r = setup.reconstruct(f.g0.values(), &e1, &e2).unwrap();
    assert_eq!((r.direct, r.via_s), (0.0, 0.0));
}

#[test]
fn reconstruction_matches_the_direct_gap_for_a_bump() {
    let f = fixture();
    let (g1, _) = perturb_in_d(&f.mesh, &f.g0, &bump(), 0.2).unwrap();
    let setup = GapSetup::new(&f.mesh, g1.values(), f.g0.values(), cfg(), DtnConfig::default(), 1).unwrap();
    let dofs = setup.full1.dofs().to_vec();
    let pairs = standard_data_pairs(&f.mesh, &dofs);
    let mut scale = 0.0f64;
    for (e1, e2) in &pairs {
        let r = setup.reconstruct(f.g0.values(), e1, e2).unwrap();
        assert!(r.rel_gap <= 0.05, "{r:?}");
        scale = scale.max(r.direct.abs());
    }
    // Constant data carries no flux on a closed surface.
    let ones = vec![1.0; dofs.len()];
    let r = setup.reconstruct(f.g0.values(), &pairs[0].0, &ones).unwrap();
    assert!(r.direct.abs() < 1e-9 * scale);
    assert!(r.via_s.abs() <= 0.05 * scale, "{r:?}");
}

#[test]
fn missing_surface_samples_are_listed() {
    let f = fixture();
    let (g1, _) = perturb_in_d(&f.mesh, &f.g0, &bump(), 0.2).unwrap();
    let full1 = assemble_full_dtn(&f.mesh, g1.values(), cfg(), DtnConfig::default(), 1).unwrap();
    let full0 = assemble_full_dtn(&f.mesh, f.g0.values(), cfg(), DtnConfig::default(), 1).unwrap();
    let kernel = SKernel::new(&f.mesh, g1.values(), f.g0.values(), cfg(), 1).unwrap();
    let surface = f.mesh.nodal_surface_quadrature(BoundaryTag::DDtilde).unwrap();
    let sample = kernel.s_normal_derivatives(&surface[2..], SKernel::default_step(&f.mesh)).unwrap();
    let eta = vec![1.0; full1.dofs().len()];
    match reconstruct_gap_via_s(&full1, &full0, &sample, &surface, f.g0.values(), &eta, &eta) {
        Err(Error::MissingSamples { nodes }) => assert_eq!(nodes, vec![surface[0].node, surface[1].node]),
        other => panic!("expected missing samples, got {other:?}"),
    }
}

#[test]
fn l2_norm_of_a_constant_is_the_root_measure() {
    let f = fixture();
    let cells = f.mesh.cells_in(RegionSet::OMEGA);
    let ones = vec![2.0; f.mesh.n_vertices()];
    assert!((l2_norm(&f.mesh, &ones, &cells) - 2.0 * f.mesh.region_measure(&cells).sqrt()).abs() < 1e-12);
    // x² over the unit-ish disk: exact for P1 interpolant integrated exactly.
    let x: Vec<f64> = f.mesh.vertices().iter().map(|p| p[0]).collect();
    assert!((l2_norm(&f.mesh, &x, &cells).powi(2) - PI / 4.0).abs() < 2e-3);
}

#[test]
fn constant_solutions_fit_any_exponent() {
    let f = fixture();
    let regions = PropagationRegions::new(&f.mesh).unwrap();
    let t = NormTriple::of(&f.mesh, &regions, &vec![1.0; f.mesh.n_vertices()]);
    let measure = |c: &CellSet| f.mesh.region_measure(c).sqrt();
    assert!((t.ball - measure(&regions.ball)).abs() < 1e-12);
    assert!((t.eroded - measure(&regions.eroded)).abs() < 1e-12);
    for eta in [0.1, 0.5, 0.9] {
        let c = t.eroded / (t.ball.powf(eta) * t.outer.powf(1.0 - eta));
        let fit = PropagationFit { c, eta, margins: vec![], min_margin: 0.0, max_margin: 0.0 };
        assert!((fit.predict(t.ball, t.outer) - t.eroded).abs() < 1e-12);
    }
    assert!(matches!(fit_propagation(&[t, t, t]), Err(Error::Degenerate(_))));
}

#[test]
fn random_harmonic_family_admits_an_interior_exponent() {
    let f = fixture();
    let regions = PropagationRegions::new(&f.mesh).unwrap();
    assert_eq!(regions.eroded_components, 1);
    let family = harmonic_family(&f.mesh, f.g0.values(), 50, 7, cfg(), 1).unwrap();
    let triples: Vec<NormTriple> = family.iter().map(|v| NormTriple::of(&f.mesh, &regions, v)).collect();
    let fit = fit_propagation(&triples).unwrap();
    assert!(fit.eta_in_open_interval(), "{fit:?}");
    assert!(fit.min_margin >= -1e-12 && fit.c == 1.0);
    // S(·, w) is γ₀-harmonic off D and must obey the fitted bound.
    let (g1, _) = perturb_in_d(&f.mesh, &f.g0, &bump(), 0.2).unwrap();
    let kernel = SKernel::new(&f.mesh, g1.values(), f.g0.values(), cfg(), 1).unwrap();
    for w in ball_samples(&f.mesh, 3, 0.9, 11) {
        let check = cascade_check(&kernel, &regions, &fit, &w, 1.0).unwrap();
        assert!(check.holds, "{check:?}");
    }
    let again = harmonic_family(&f.mesh, f.g0.values(), 50, 7, cfg(), 3).unwrap();
    assert_eq!(family, again);
}

fn row(k: usize, epsilon: f64, full_gap: f64, sup_gap: f64) -> SweepRow {
    SweepRow { k, t: 0.5f64.powi(k as i32), epsilon, full_gap, sup_gap, recon_rel_gap: None, dropped: false }
}

#[test]
fn sweep_summary_of_power_laws() {
    let rows: Vec<SweepRow> =
        (0..7).map(|k| 0.5f64.powi(k)).map(|t| (t, row(0, 1e-2 * t, 3e-3 * t.powf(0.8), 0.2 * t))).map(|(_, r)| r).collect();
    let rep = summarize_sweep(rows, 0.4).unwrap();
    assert!((rep.beta.slope - 0.8).abs() < 1e-12 && (rep.beta.beta - 0.8).abs() < 1e-12);
    assert!(rep.beta.r2 > 0.999);
    assert!(rep.beta.margins.iter().all(|&m| m >= -1e-12));
    assert!(rep.delta.delta > 0.0 && rep.delta.delta <= 1.0 && rep.delta.c >= 1.0);
    assert!(rep.delta.margins.iter().all(|&m| m >= -1e-12));
    assert!(rep.epsilon_strictly_decreasing && rep.sup_gap_capped);
    let csv = rep.summary_csv();
    let beta: f64 = csv.lines().find_map(|l| l.strip_prefix("beta,")).unwrap().parse().unwrap();
    assert!((beta - 0.8).abs() < 1e-12);
}

#[test]
fn all_zero_sweep_is_degenerate() {
    let rows: Vec<SweepRow> = (0..7).map(|k| row(k, 0.0, 0.0, 0.0)).collect();
    assert!(matches!(summarize_sweep(rows, 0.4), Err(Error::Degenerate(_))));
    let noisy: Vec<SweepRow> = (0..7).map(|k| SweepRow { dropped: true, ..row(k, 1e-14, 1e-14, 0.0) }).collect();
    assert!(summarize_sweep(noisy, 0.4).is_err());
}

#[test]
fn stability_sweep_on_the_default_disk() {
    let f = fixture();
    let spec = SweepSpec { t0: 0.4, levels: 4, bump: bump(), reconstruct: false };
    let rep = stability_sweep(&f.mesh, &f.g0, &spec, cfg(), DtnConfig::default(), 1).unwrap();
    assert_eq!(rep.rows.len(), 5);
    assert!(rep.epsilon_strictly_decreasing);
    assert!(rep.beta.beta > 0.0 && rep.beta.beta <= 1.0 && rep.beta.r2 >= 0.9, "{:?}", rep.beta);
    assert!(rep.sup_gap_capped);
    let csv = rep.rows_csv();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn sweep_rejects_too_few_levels() {
    let f = fixture();
    let spec = SweepSpec { t0: 0.4, levels: 3, bump: bump(), reconstruct: false };
    assert!(matches!(stability_sweep(&f.mesh, &f.g0, &spec, cfg(), DtnConfig::default(), 1), Err(Error::Config { .. })));
}

#[test]
fn green_energy_decreases_with_the_radius_in_two_dimensions() {
    let f = fixture();
    let meta = f.mesh.meta();
    let d = energy_decay(&f.mesh, f.g0.values(), &[0.0, 0.0, 0.0], 4.0 * meta.mesh_size, meta.rho1, 6, cfg()).unwrap();
    assert!(d.energies.windows(2).all(|w| w[1] < w[0]));
    assert!(d.fit.slope < 0.0);
}

