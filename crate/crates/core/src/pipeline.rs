//! Configuration-driven runs: builds every object a stage needs, writes the
//! artifacts, and records each file with its SHA-256 in `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    ball_samples, cascade_check, fit_propagation, harmonic_family, reconstruct_gap_via_s, stability_sweep,
    standard_data_pairs, CascadeCheck, NormTriple, PropagationRegions,
};
use crate::conductivity::{dump_field, make_reference, perturb_in_d, ConductivityField};
use crate::config::RunConfig;
use crate::dtn::{assemble_full_dtn, assemble_local_dtn, dump_operator, BoundaryOperator};
use crate::error::{Error, Result};
use crate::geometry::io::dump_mesh;
use crate::geometry::{build_domain, BoundaryTag, MeshedDomain};
use crate::skernel::SKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Mesh,
    Dtn,
    Skernel,
    Experiment,
    Run,
}

impl Stage {
    fn includes(self, other: Stage) -> bool {
        self == other || self == Stage::Run
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub stage: Stage,
    pub seed: u64,
    /// Every file written by the run except the manifest itself, in write order.
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

/// First 16 hex digits of the SHA-256 of the normalized configuration.
pub fn run_id(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.normalized().to_json().as_bytes()))[..16].to_string()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            bytes: contents.len() as u64,
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }
}

struct Fields {
    gamma0: ConductivityField,
    gamma1: ConductivityField,
    sup_gap: f64,
}

struct Operators {
    local0: BoundaryOperator,
    local1: BoundaryOperator,
    full0: BoundaryOperator,
    full1: BoundaryOperator,
}

/// Validates the configuration, then runs `stage` into `config.output.dir`.
pub fn run(config: &RunConfig, stage: Stage) -> Result<Manifest> {
    config.validate()?;
    let id = run_id(config);
    let mut out = Outputs::new(&config.output.dir)?;
    out.write("config.json", &(config.normalized().to_json() + "\n"))?;

    let mesh = build_domain(&config.geometry)?;
    out.write("mesh.txt", &dump_mesh(&mesh))?;

    if stage != Stage::Mesh {
        let fields = make_fields(config, &mesh)?;
        out.write("gamma0.txt", &dump_field(&fields.gamma0))?;
        out.write("gamma1.txt", &dump_field(&fields.gamma1))?;

        let ops = if stage.includes(Stage::Dtn) || stage.includes(Stage::Skernel) {
            Some(make_operators(config, &mesh, &fields)?)
        } else {
            None
        };
        if let (true, Some(ops)) = (stage.includes(Stage::Dtn), &ops) {
            write_operators(&mut out, &fields, ops)?;
        }
        if let (true, Some(ops)) = (stage.includes(Stage::Skernel), &ops) {
            write_kernel(&mut out, config, &mesh, &fields, ops)?;
        }
        if stage.includes(Stage::Experiment) {
            write_experiment(&mut out, config, &mesh, &fields, &id)?;
        }
    }

    let manifest = Manifest { run_id: id, stage, seed: config.seed, files: out.files };
    let path = config.output.dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn make_fields(config: &RunConfig, mesh: &MeshedDomain) -> Result<Fields> {
    let c = &config.conductivity;
    let gamma0 = make_reference(mesh, c.profile, c.lambda, c.e_bound)?;
    let (gamma1, sup_gap) = perturb_in_d(mesh, &gamma0, &config.sweep.bump, config.sweep.t0)?;
    Ok(Fields { gamma0, gamma1, sup_gap })
}

fn make_operators(config: &RunConfig, mesh: &MeshedDomain, f: &Fields) -> Result<Operators> {
    let (s, d, t) = (config.solver, config.dtn, config.threads);
    Ok(Operators {
        local0: assemble_local_dtn(mesh, f.gamma0.values(), s, d, t)?,
        local1: assemble_local_dtn(mesh, f.gamma1.values(), s, d, t)?,
        full0: assemble_full_dtn(mesh, f.gamma0.values(), s, d, t)?,
        full1: assemble_full_dtn(mesh, f.gamma1.values(), s, d, t)?,
    })
}

fn write_operators(out: &mut Outputs, f: &Fields, ops: &Operators) -> Result<()> {
    out.write("local_gamma0.txt", &dump_operator(&ops.local0))?;
    out.write("local_gamma1.txt", &dump_operator(&ops.local1))?;
    out.write("full_gamma0.txt", &dump_operator(&ops.full0))?;
    out.write("full_gamma1.txt", &dump_operator(&ops.full1))?;
    let mut csv = String::from("key,value\n");
    let _ = writeln!(csv, "local_dofs,{}", ops.local0.dofs().len());
    let _ = writeln!(csv, "full_dofs,{}", ops.full0.dofs().len());
    let _ = writeln!(csv, "epsilon,{:e}", ops.local1.distance(&ops.local0)?);
    let _ = writeln!(csv, "full_gap,{:e}", ops.full1.distance(&ops.full0)?);
    let _ = writeln!(csv, "sup_gap,{:e}", f.sup_gap);
    out.write("dtn.csv", &csv)
}

fn write_kernel(out: &mut Outputs, config: &RunConfig, mesh: &MeshedDomain, f: &Fields, ops: &Operators) -> Result<()> {
    let kernel = SKernel::new(mesh, f.gamma1.values(), f.gamma0.values(), config.solver, config.threads)?;
    let surface = mesh.nodal_surface_quadrature(BoundaryTag::DDtilde)?;
    let sample = kernel.s_normal_derivatives(&surface, SKernel::default_step(mesh))?;
    out.write("kernel.csv", &sample.to_csv())?;

    let gap = ops.local1.minus(&ops.local0)?;
    let n = config.propagation.cascade_points;
    let zs = ball_samples(mesh, n, 0.9, config.seed.wrapping_add(2));
    let ws = ball_samples(mesh, n, 0.9, config.seed.wrapping_add(3));
    let mut csv = String::from("z_x,z_y,z_z,w_x,w_y,w_z,s_direct,s_pairing,relative_difference\n");
    for (z, w) in zs.iter().zip(&ws) {
        let direct = kernel.s_direct(z, w)?;
        let pairing = kernel.s_via_pairing(z, w, &gap)?;
        let rel = (direct - pairing).abs() / direct.abs().max(1e-14);
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e},{:e},{direct:e},{pairing:e},{rel:e}",
            z[0], z[1], z[2], w[0], w[1], w[2]
        );
    }
    out.write("kernel_pairing.csv", &csv)?;

    let mut csv = String::from("pair,direct,via_s,i1,i2,i3,i4,rel_gap\n");
    for (i, (e1, e2)) in standard_data_pairs(mesh, ops.full0.dofs()).iter().enumerate() {
        let r = reconstruct_gap_via_s(&ops.full1, &ops.full0, &sample, &surface, f.gamma0.values(), e1, e2)?;
        let [t1, t2, t3, t4] = r.terms;
        let _ = writeln!(csv, "{i},{:e},{:e},{t1:e},{t2:e},{t3:e},{t4:e},{:e}", r.direct, r.via_s, r.rel_gap);
    }
    out.write("reconstruction.csv", &csv)
}

fn write_experiment(out: &mut Outputs, config: &RunConfig, mesh: &MeshedDomain, f: &Fields, id: &str) -> Result<()> {
    let (s, t) = (config.solver, config.threads);
    let mut report = stability_sweep(mesh, &f.gamma0, &config.sweep, s, config.dtn, t)?;
    report.run_id = id.to_string();

    let regions = PropagationRegions::new(mesh)?;
    let family = harmonic_family(mesh, f.gamma0.values(), config.propagation.family_size, config.seed, s, t)?;
    let triples: Vec<NormTriple> = family.iter().map(|v| NormTriple::of(mesh, &regions, v)).collect();
    let fit = fit_propagation(&triples)?;
    let kernel = SKernel::new(mesh, f.gamma1.values(), f.gamma0.values(), s, t)?;
    let epsilon = report.rows[0].epsilon;
    let ws = ball_samples(mesh, config.propagation.cascade_points, 0.9, config.seed.wrapping_add(1));
    let cascade: Vec<CascadeCheck> =
        ws.iter().map(|w| cascade_check(&kernel, &regions, &fit, w, epsilon)).collect::<Result<_>>()?;
    if regions.eroded_components != 1 {
        report.warnings.push(format!("eroded shell has {} components", regions.eroded_components));
    }

    let mut csv = String::from("member,ball,eroded,outer,margin\n");
    for (i, (t, m)) in triples.iter().zip(&fit.margins).enumerate() {
        let _ = writeln!(csv, "{i},{:e},{:e},{:e},{m:e}", t.ball, t.eroded, t.outer);
    }
    let mut cas = String::from("w_x,w_y,w_z,ball,eroded,outer,predicted,holds,ball_over_epsilon\n");
    for c in &cascade {
        let _ = writeln!(
            cas,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            c.w[0], c.w[1], c.w[2], c.norms.ball, c.norms.eroded, c.norms.outer, c.predicted, c.holds, c.ball_over_epsilon
        );
    }
    report.eta = Some(fit);
    report.cascade = cascade;

    out.write("experiment.csv", &report.rows_csv())?;
    out.write("summary.csv", &report.summary_csv())?;
    out.write("propagation.csv", &csv)?;
    out.write("cascade.csv", &cas)?;
    let mut warnings = String::new();
    for w in &report.warnings {
        let _ = writeln!(warnings, "{w}");
    }
    out.write("warnings.txt", &warnings)
}
