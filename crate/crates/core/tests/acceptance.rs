//! Acceptance criteria, one line of output each. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 4 5`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use eitlab::analysis::{
    ball_samples, cascade_check, energy_decay, fit_propagation, harmonic_family, stability_sweep, standard_data_pairs,
    GapSetup, NormTriple, PropagationRegions,
};
use eitlab::conductivity::{make_reference, perturb_in_d, Bump, BumpShape, ConductivityField, Profile};
use eitlab::config::RunConfig;
use eitlab::dtn::{assemble_full_dtn, assemble_local_dtn, BoundaryOperator, DtnConfig};
use eitlab::geometry::{build_domain, GeometryParams, MeshedDomain, RegionSet};
use eitlab::pde::{assemble, DirichletProblem, GreenSolver};
use eitlab::pipeline::{self, Stage};
use eitlab::simplex::Point;
use eitlab::skernel::{SKernel, Variable};
use eitlab::solver::SolverConfig;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn solver() -> SolverConfig {
    SolverConfig::default()
}

fn bump() -> Bump {
    Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 }
}

fn reference(mesh: &MeshedDomain) -> ConductivityField {
    make_reference(mesh, Profile::SmoothRamp { from: 1.0, to: 1.5 }, 0.4, 500.0).unwrap()
}

fn disk(mesh_size: f64) -> MeshedDomain {
    build_domain(&GeometryParams { mesh_size, ..GeometryParams::default_disk() }).unwrap()
}

/// Largest `|⟨(Λ₁−Λ₂)η₁, η₂⟩ − ∫(γ₁−γ₂)∇v₁·∇v₂| / (|value| + 1)` over
/// random data pairs.
fn gap_identity(mesh: &MeshedDomain, g1: &ConductivityField, g2: &ConductivityField, local: bool, pairs: usize) -> f64 {
    let assemble_op = |g: &ConductivityField| -> BoundaryOperator {
        if local {
            assemble_local_dtn(mesh, g.values(), solver(), DtnConfig::default(), 1).unwrap()
        } else {
            assemble_full_dtn(mesh, g.values(), solver(), DtnConfig::default(), 1).unwrap()
        }
    };
    let (a1, a2) = (assemble_op(g1), assemble_op(g2));
    let cells = mesh.cells_in(if local { RegionSet::OMEGA } else { RegionSet::DTILDE });
    let p1 = DirichletProblem::new(mesh, g1.values(), &cells, solver()).unwrap();
    let p2 = DirichletProblem::new(mesh, g2.values(), &cells, solver()).unwrap();
    let k_delta = assemble(mesh, &g1.difference(g2), &mesh.cells_in(RegionSet::D)).unwrap();
    let diff = a1.difference(&a2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(if local { 11 } else { 12 });
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let n = a1.dofs().len();
        let eta1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eta2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lift = |p: &DirichletProblem, eta: &[f64]| {
            let mut data = vec![0.0; p.boundary().len()];
            for (k, &v) in a1.dofs().iter().enumerate() {
                data[p.boundary_position(v).unwrap()] = eta[k];
            }
            p.solve(&data).unwrap().values
        };
        let lhs = DVector::from_column_slice(&eta2).dot(&(&diff * DVector::from_column_slice(&eta1)));
        let rhs = k_delta.bilinear(&lift(&p1, &eta1), &lift(&p2, &eta2));
        worst = worst.max((lhs - rhs).abs() / (rhs.abs() + 1.0));
    }
    worst
}

fn criterion_1() -> Outcome {
    let mesh = disk(0.02);
    let g0 = reference(&mesh);
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump(), 0.3).unwrap();
    let sigma = gap_identity(&mesh, &g1, &g0, true, 10);
    let dtilde = gap_identity(&mesh, &g1, &g0, false, 10);
    outcome(
        sigma <= 1e-10 && dtilde <= 1e-10,
        format!("worst scaled error {sigma:.2e} on Sigma, {dtilde:.2e} on the D-tilde boundary (limit 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let mesh = disk(0.02);
    let g0 = reference(&mesh);
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump(), 0.3).unwrap();
    let kernel = SKernel::new(&mesh, g1.values(), g0.values(), solver(), 1).unwrap();
    let l1 = assemble_local_dtn(&mesh, g1.values(), solver(), DtnConfig::default(), 1).unwrap();
    let l0 = assemble_local_dtn(&mesh, g0.values(), solver(), DtnConfig::default(), 1).unwrap();
    let gap = l1.minus(&l0).unwrap();
    let zs = ball_samples(&mesh, 5, 0.95, 21);
    let ws = ball_samples(&mesh, 5, 0.95, 22);
    let mut worst = 0.0f64;
    for (z, w) in zs.iter().zip(&ws) {
        let direct = kernel.s_direct(z, w).unwrap();
        let pairing = kernel.s_via_pairing(z, w, &gap).unwrap();
        worst = worst.max((direct - pairing).abs() / direct.abs().max(1e-14));
    }
    outcome(worst <= 1e-8, format!("worst relative difference {worst:.2e} over 5 source pairs (limit 1e-8)"))
}

fn criterion_3() -> Outcome {
    let mesh = disk(0.02);
    let g0 = reference(&mesh);
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump(), 0.3).unwrap();
    let kernel = SKernel::new(&mesh, g1.values(), g0.values(), solver(), 1).unwrap();
    let q = mesh.meta().q;
    let r = 0.6 * mesh.meta().rho1;
    let limit = 100.0 * solver().tol;
    let mut worst = [0.0f64; 2];
    for k in 0..3 {
        let t = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
        let p: Point = [q[0] + r * t.cos(), q[1] + r * t.sin(), 0.0];
        for (slot, variable) in [Variable::Z, Variable::W].into_iter().enumerate() {
            let rep = kernel.elliptic_residual(g0.values(), &p, variable).unwrap();
            worst[slot] = worst[slot].max(rep.max_relative);
        }
    }
    outcome(
        worst.iter().all(|&w| w <= limit),
        format!("worst row-relative residual {:.2e} in z, {:.2e} in w (limit {limit:.0e})", worst[0], worst[1]),
    )
}

fn criterion_4() -> Outcome {
    let params = GeometryParams::default_box();
    let h = params.mesh_size;
    let mesh = build_domain(&params).unwrap();
    let gamma = reference(&mesh);
    let config = SolverConfig { tol: 1e-10, ..solver() };
    let unknowns = GreenSolver::new(&mesh, gamma.values(), config).unwrap().problem().interior().len();
    let centre = [0.5, 0.5, 0.5];
    let d3 = energy_decay(&mesh, gamma.values(), &centre, 4.0 * h, params.rho1, 6, config).unwrap();
    let slope = d3.fit.slope;
    let mesh2 = disk(0.02);
    let g2 = reference(&mesh2);
    let m2 = mesh2.meta();
    let d2 = energy_decay(&mesh2, g2.values(), &[0.0, 0.0, 0.0], 4.0 * m2.mesh_size, m2.rho1, 6, solver()).unwrap();
    outcome(
        unknowns <= 150_000 && (-1.4..=-0.6).contains(&slope),
        format!(
            "3D slope {slope:.3} over 6 radii in [{:.3}, {:.3}] with {unknowns} unknowns (range [-1.4, -0.6]); 2D companion slope {:.3}, documentation only",
            4.0 * h,
            params.rho1,
            d2.fit.slope
        ),
    )
}

fn reconstruction_gaps(mesh_size: f64) -> Vec<f64> {
    let mesh = disk(mesh_size);
    let g0 = reference(&mesh);
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump(), 0.2).unwrap();
    let setup = GapSetup::new(&mesh, g1.values(), g0.values(), solver(), DtnConfig::default(), 1).unwrap();
    standard_data_pairs(&mesh, setup.full1.dofs())
        .iter()
        .map(|(e1, e2)| setup.reconstruct(g0.values(), e1, e2).unwrap().rel_gap)
        .collect()
}

fn criterion_5() -> Outcome {
    let coarse = reconstruction_gaps(0.02);
    let fine = reconstruction_gaps(0.01);
    let within = coarse.iter().all(|&g| g <= 0.05);
    let decreasing = coarse.iter().zip(&fine).all(|(c, f)| f < c);
    let fmt = |v: &[f64]| v.iter().map(|g| format!("{:.2}%", 100.0 * g)).collect::<Vec<_>>().join(" ");
    outcome(
        within && decreasing,
        format!("relative gaps {} at h = 0.02, {} at h = 0.01 (limit 5%, must decrease)", fmt(&coarse), fmt(&fine)),
    )
}

fn criterion_6() -> Outcome {
    let mesh = disk(0.02);
    let g0 = reference(&mesh);
    let regions = PropagationRegions::new(&mesh).unwrap();
    let family = harmonic_family(&mesh, g0.values(), 50, 6, solver(), 1).unwrap();
    let triples: Vec<NormTriple> = family.iter().map(|v| NormTriple::of(&mesh, &regions, v)).collect();
    let fit = fit_propagation(&triples).unwrap();
    let (g1, _) = perturb_in_d(&mesh, &g0, &bump(), 0.2).unwrap();
    let l1 = assemble_local_dtn(&mesh, g1.values(), solver(), DtnConfig::default(), 1).unwrap();
    let l0 = assemble_local_dtn(&mesh, g0.values(), solver(), DtnConfig::default(), 1).unwrap();
    let epsilon = l1.distance(&l0).unwrap();
    let kernel = SKernel::new(&mesh, g1.values(), g0.values(), solver(), 1).unwrap();
    let checks: Vec<_> = ball_samples(&mesh, 5, 0.9, 61)
        .iter()
        .map(|w| cascade_check(&kernel, &regions, &fit, w, epsilon).unwrap())
        .collect();
    let holds = checks.iter().filter(|c| c.holds).count();
    let worst = checks.iter().map(|c| c.norms.eroded / c.predicted).fold(0.0, f64::max);
    let c_ball = checks.iter().map(|c| c.ball_over_epsilon).fold(0.0, f64::max);
    outcome(
        fit.eta_in_open_interval() && fit.min_margin >= 0.0 && holds == checks.len(),
        format!(
            "eta = {:.4} with C = {}, min margin {:.1e}; cascade holds at {holds}/5 sources (worst measured/predicted {worst:.3}, ball norm / epsilon <= {c_ball:.2e})",
            fit.eta, fit.c, fit.min_margin
        ),
    )
}

fn criterion_7() -> Outcome {
    let mesh = disk(0.02);
    let g0 = reference(&mesh);
    let spec = eitlab::analysis::SweepSpec { t0: 0.4, levels: 6, bump: bump(), reconstruct: false };
    let rep = stability_sweep(&mesh, &g0, &spec, solver(), DtnConfig::default(), 1).unwrap();
    let b = &rep.beta;
    let d = &rep.delta;
    let positive = |m: &[f64]| m.iter().filter(|&&x| x > 0.0).count();
    let k = spec.levels;
    let passed = rep.rows.len() == k + 1
        && rep.rows.iter().all(|r| !r.dropped)
        && rep.epsilon_strictly_decreasing
        && b.beta > 0.0
        && b.beta <= 1.0
        && b.r2 >= 0.9
        && d.c >= 1.0
        && d.delta > 0.0
        && d.delta <= 1.0
        && b.margins.iter().chain(&d.margins).all(|&m| m >= -1e-12)
        && positive(&b.margins) + 1 >= k
        && positive(&d.margins) + 1 >= k
        && rep.sup_gap_capped;
    outcome(
        passed,
        format!(
            "beta = {:.3} (raw slope {:.4}, R2 {:.6}), delta = {:.3} with C = {:.3}; positive margins {}/{} and {}/{}; epsilon decreasing: {}; sup gap <= {}: {}",
            b.beta,
            b.slope,
            b.r2,
            d.delta,
            d.c,
            positive(&b.margins),
            b.margins.len(),
            positive(&d.margins),
            d.margins.len(),
            rep.epsilon_strictly_decreasing,
            rep.sup_gap_cap,
            rep.sup_gap_capped
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let mut config = RunConfig::default_disk();
        config.output.dir = dir.path().join(name);
        let m = pipeline::run(&config, Stage::Run).unwrap();
        let mut bytes = Vec::new();
        for f in m.files.iter().filter(|f| f.path.ends_with(".csv")) {
            bytes.push((f.path.clone(), fs::read(config.output.dir.join(&f.path)).unwrap()));
        }
        csv.push(bytes);
        manifests.push(fs::read(config.output.dir.join(pipeline::MANIFEST)).unwrap());
    }
    let same = manifests[0] == manifests[1] && csv[0] == csv[1];
    outcome(same, format!("{} CSV files and the manifest compared across two runs: identical = {same}", csv[0].len()))
}

type Criterion = (usize, &'static str, Duration, fn() -> Outcome);

const CRITERIA: [Criterion; 8] = [
    (1, "discrete gap identity", Duration::from_secs(60), criterion_1),
    (2, "S kernel direct vs pairing", Duration::from_secs(120), criterion_2),
    (3, "elliptic residual of S", Duration::from_secs(120), criterion_3),
    (4, "Green energy decay exponent", Duration::from_secs(1800), criterion_4),
    (5, "interior-surface gap from S", Duration::from_secs(600), criterion_5),
    (6, "propagation of smallness", Duration::from_secs(300), criterion_6),
    (7, "stability sweep", Duration::from_secs(900), criterion_7),
    (8, "determinism", Duration::from_secs(600), criterion_8),
];

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, budget, f) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed <= budget, o.detail),
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] criterion {n} {name}: {detail}; {:.1}s (budget {}s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
