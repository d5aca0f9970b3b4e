//! The JSON run configuration, its validation, and the mapping from
//! configuration keys to process exit codes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::SweepSpec;
use crate::conductivity::{Bump, BumpShape, Profile};
use crate::dtn::{DtnConfig, MAX_PARSED_DOFS};
use crate::error::{Error, Result};
use crate::geometry::{Family, GeometryParams};
use crate::solver::SolverConfig;

/// Reference conductivity and its a-priori bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivitySpec {
    pub profile: Profile,
    pub lambda: f64,
    pub e_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSpec {
    /// Members of the random γ₀-harmonic family.
    pub family_size: usize,
    /// Sources w ∈ B_{ρ₁}(Q) at which the cascaded bound is checked.
    pub cascade_points: usize,
}

impl Default for PropagationSpec {
    fn default() -> Self {
        PropagationSpec { family_size: 50, cascade_points: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryParams,
    pub conductivity: ConductivitySpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub propagation: PropagationSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dtn: DtnConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

/// Process exit codes. Every validation failure exits with the code of the
/// top-level section its key belongs to.
pub mod exit {
    pub const RUNTIME: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const SCHEMA: u8 = 3;
    pub const GEOMETRY: u8 = 4;
    pub const CONDUCTIVITY: u8 = 5;
    pub const SWEEP: u8 = 6;
    pub const PROPAGATION: u8 = 7;
    pub const SOLVER: u8 = 8;
    pub const DTN: u8 = 9;
    pub const OUTPUT: u8 = 10;
    pub const THREADS: u8 = 11;
}

/// Exit code for a configuration key such as `geometry.d0`.
pub fn exit_code_for_key(key: &str) -> u8 {
    match key.split('.').next().unwrap_or("") {
        "geometry" => exit::GEOMETRY,
        "conductivity" => exit::CONDUCTIVITY,
        "sweep" => exit::SWEEP,
        "propagation" => exit::PROPAGATION,
        "solver" => exit::SOLVER,
        "dtn" => exit::DTN,
        "output" => exit::OUTPUT,
        "threads" => exit::THREADS,
        _ => exit::SCHEMA,
    }
}

/// Exit code for any error surfaced by a run.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { key, .. } => exit_code_for_key(key),
        Error::Parse { .. } => exit::SCHEMA,
        Error::Geometry { .. } => exit::GEOMETRY,
        Error::Conductivity { key, .. } if key.starts_with("bump") || *key == "amplitude" => exit::SWEEP,
        Error::Conductivity { .. } => exit::CONDUCTIVITY,
        Error::Io { .. } => exit::OUTPUT,
        _ => exit::RUNTIME,
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { key: key.into(), reason: reason.into() }
}

impl RunConfig {
    /// The bundled configuration: default disk, smooth ramp reference,
    /// cosine bump, seven dyadic amplitudes.
    pub fn default_disk() -> Self {
        RunConfig {
            geometry: GeometryParams::default_disk(),
            conductivity: ConductivitySpec {
                profile: Profile::SmoothRamp { from: 1.0, to: 1.5 },
                lambda: 0.4,
                e_bound: 500.0,
            },
            sweep: SweepSpec {
                t0: 0.4,
                levels: 6,
                bump: Bump { shape: BumpShape::Cosine, centre: [0.06, 0.04, 0.0], radius: 0.12 },
                reconstruct: true,
            },
            propagation: PropagationSpec::default(),
            solver: SolverConfig::default(),
            dtn: DtnConfig::default(),
            seed: 1,
            output: OutputSpec::default(),
            threads: 1,
        }
    }

    /// Parses a JSON document. Unknown keys and type mismatches are errors
    /// naming the offending path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse { line: inner.line(), reason: format!("{path}: {inner}") }
        })?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Checks every key that can be checked without a mesh.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate().map_err(|e| match e {
            Error::Geometry { key, reason } => invalid(format!("geometry.{key}"), reason),
            other => other,
        })?;

        let c = &self.conductivity;
        if !(c.lambda > 0.0 && c.lambda < 1.0) {
            return Err(invalid("conductivity.lambda", format!("must lie in (0, 1), got {}", c.lambda)));
        }
        if !(c.e_bound > 0.0 && c.e_bound.is_finite()) {
            return Err(invalid("conductivity.e_bound", format!("must be positive and finite, got {}", c.e_bound)));
        }
        let (lo, hi) = match c.profile {
            Profile::Constant { value } => (value, value),
            Profile::SmoothRamp { from, to } => (from.min(to), from.max(to)),
        };
        let admissible = |g: f64| g > c.lambda && g < 1.0 / c.lambda;
        if !(admissible(lo) && admissible(hi)) {
            return Err(invalid(
                "conductivity.profile",
                format!("values in [{lo}, {hi}] leave the interval ({}, {})", c.lambda, 1.0 / c.lambda),
            ));
        }

        let s = &self.sweep;
        if !(s.t0.is_finite() && s.t0 != 0.0) {
            return Err(invalid("sweep.t0", format!("must be finite and nonzero, got {}", s.t0)));
        }
        if !admissible(hi + s.t0.max(0.0)) || !admissible(lo + s.t0.min(0.0)) {
            return Err(invalid(
                "sweep.t0",
                format!("reference plus {} leaves the interval ({}, {})", s.t0, c.lambda, 1.0 / c.lambda),
            ));
        }
        if !(4..=40).contains(&s.levels) {
            return Err(invalid("sweep.levels", format!("must lie in 4..=40, got {}", s.levels)));
        }
        if !(s.bump.radius > 0.0 && s.bump.radius.is_finite()) {
            return Err(invalid("sweep.bump.radius", format!("must be positive and finite, got {}", s.bump.radius)));
        }
        if s.bump.centre.iter().any(|x| !x.is_finite()) {
            return Err(invalid("sweep.bump.centre", "coordinates must be finite"));
        }
        let inside_d = match &self.geometry.family {
            Family::Disk(d) => s.bump.centre[0].hypot(s.bump.centre[1]) + s.bump.radius < d.r_d,
            Family::Box(b) => s.bump.centre.iter().all(|x| (x - 0.5 * b.side).abs() + s.bump.radius < b.d_half),
        };
        if !inside_d {
            return Err(invalid("sweep.bump", "the bump support must lie strictly inside D"));
        }

        let p = &self.propagation;
        if p.family_size < 3 {
            return Err(invalid("propagation.family_size", format!("need at least 3 members, got {}", p.family_size)));
        }
        if p.cascade_points == 0 {
            return Err(invalid("propagation.cascade_points", "need at least one source"));
        }

        let sv = &self.solver;
        if !(sv.tol > 0.0 && sv.tol < 1e-3) {
            return Err(invalid("solver.tol", format!("must lie in (0, 1e-3), got {}", sv.tol)));
        }
        if sv.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be positive"));
        }
        if !(1..=MAX_PARSED_DOFS).contains(&self.dtn.max_dofs) {
            return Err(invalid("dtn.max_dofs", format!("must lie in 1..={MAX_PARSED_DOFS}, got {}", self.dtn.max_dofs)));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        if !(1..=256).contains(&self.threads) {
            return Err(invalid("threads", format!("must lie in 1..=256, got {}", self.threads)));
        }
        Ok(())
    }

    /// The configuration with everything that cannot change results
    /// (output directory, thread count) reset, for hashing and archiving.
    pub fn normalized(&self) -> Self {
        RunConfig { output: OutputSpec { dir: PathBuf::from(".") }, threads: 1, ..self.clone() }
    }
}
