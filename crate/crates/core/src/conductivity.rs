//! Scalar conductivity coefficients sampled at mesh vertices and
//! interpolated linearly over cells.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellSet, MeshedDomain, RegionSet};
use crate::simplex::{self, Point};
use crate::textio::{arity, expect_header, f64_at, push_record, records};

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    values: Vec<f64>,
    lambda: f64,
    e_bound: f64,
    e1: f64,
}

/// Reference coefficient profiles. Both are defined on all of Ω̃, so no
/// separate extension step is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `from + (to - from) s(τ)` with the smoothstep `s(τ) = 3τ² − 2τ³`,
    /// where τ is the first coordinate rescaled so that Ω spans [0, 1],
    /// clamped outside.
    SmoothRamp { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `½(1 + cos πs)` for `s = |x − c| / r < 1`.
    Cosine,
    /// `exp(1 − 1/(1 − s²))` for `s < 1`.
    Mollifier,
}

/// A unit-peak bump. The centre is snapped to the nearest vertex strictly
/// inside D so the peak value 1 is attained at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub shape: BumpShape,
    pub centre: Point,
    pub radius: f64,
}

impl BumpShape {
    pub fn profile(self, s: f64) -> f64 {
        if !(s < 1.0) {
            return 0.0;
        }
        match self {
            BumpShape::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * s).cos()),
            BumpShape::Mollifier => (1.0 - 1.0 / (1.0 - s * s)).exp(),
        }
    }
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub worst: f64,
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// λ < γ < 1/λ at every vertex of Ω̃.
    pub ellipticity: Check,
    /// Discrete W^{2,∞} surrogate on Ω against E.
    pub regularity: Check,
    /// Discrete W^{1,∞} surrogate on Ω̃ against E₁.
    pub lipschitz: Check,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.ellipticity.passed && self.regularity.passed && self.lipschitz.passed
    }
}

impl ConductivityField {
    /// Wraps raw vertex values; E₁ is measured on the mesh.
    pub fn new(mesh: &MeshedDomain, values: Vec<f64>, lambda: f64, e_bound: f64) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::Dimension(format!("{} values for {} vertices", values.len(), mesh.n_vertices())));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Conductivity { key: "lambda", reason: format!("must lie in (0, 1), got {lambda}") });
        }
        if !(e_bound > 0.0 && e_bound.is_finite()) {
            return Err(Error::Conductivity { key: "e_bound", reason: format!("must be positive, got {e_bound}") });
        }
        let all = mesh.cells_in(RegionSet::OMEGA_TILDE);
        let e1 = first_order_surrogate(mesh, &values, &all).0;
        let field = ConductivityField { values, lambda, e_bound, e1 };
        let ell = field.ellipticity();
        if !ell.passed {
            return Err(Error::Conductivity {
                key: "ellipticity",
                reason: format!("value {} at vertex {:?} is outside ({lambda}, {})", ell.worst, ell.vertex, 1.0 / lambda),
            });
        }
        Ok(field)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn e_bound(&self) -> f64 {
        self.e_bound
    }

    pub fn e1(&self) -> f64 {
        self.e1
    }

    /// Pointwise difference `self − other`, for assembling the stiffness of
    /// γ₁ − γ₂. Not itself a conductivity.
    pub fn difference(&self, other: &ConductivityField) -> Vec<f64> {
        self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()
    }

    pub fn sup_distance(&self, other: &ConductivityField) -> f64 {
        self.difference(other).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    fn ellipticity(&self) -> Check {
        let (lo, hi) = (self.lambda, 1.0 / self.lambda);
        let mut worst = (0.0f64, None, self.values.first().copied().unwrap_or(1.0));
        let mut passed = true;
        for (v, &g) in self.values.iter().enumerate() {
            // Margin into the admissible interval; negative means violated.
            let margin = (g - lo).min(hi - g);
            if !(margin > 0.0) {
                passed = false;
            }
            if worst.1.is_none() || margin < worst.0 {
                worst = (margin, Some(v), g);
            }
        }
        Check { passed, worst: worst.2, vertex: worst.1 }
    }

    /// Checks every invariant of the admissible class. Pure.
    pub fn validate(&self, mesh: &MeshedDomain) -> ValidationReport {
        let omega = mesh.cells_in(RegionSet::OMEGA);
        let (w2, v2) = second_order_surrogate(mesh, &self.values, &omega);
        let all = mesh.cells_in(RegionSet::OMEGA_TILDE);
        let (w1, v1) = first_order_surrogate(mesh, &self.values, &all);
        ValidationReport {
            ellipticity: self.ellipticity(),
            regularity: Check { passed: w2 <= self.e_bound, worst: w2, vertex: v2 },
            lipschitz: Check { passed: w1 <= self.e1 * (1.0 + 1e-12), worst: w1, vertex: v1 },
        }
    }
}

pub fn make_reference(mesh: &MeshedDomain, profile: Profile, lambda: f64, e_bound: f64) -> Result<ConductivityField> {
    let values = match profile {
        Profile::Constant { value } => vec![value; mesh.n_vertices()],
        Profile::SmoothRamp { from, to } => {
            let nodes = mesh.nodes_of(&mesh.cells_in(RegionSet::OMEGA));
            let lo = nodes.iter().map(|&v| mesh.vertex(v)[0]).fold(f64::INFINITY, f64::min);
            let hi = nodes.iter().map(|&v| mesh.vertex(v)[0]).fold(f64::NEG_INFINITY, f64::max);
            mesh.vertices()
                .iter()
                .map(|p| {
                    let t = ((p[0] - lo) / (hi - lo)).clamp(0.0, 1.0);
                    from + (to - from) * t * t * (3.0 - 2.0 * t)
                })
                .collect()
        }
    };
    ConductivityField::new(mesh, values, lambda, e_bound)
}

/// Vertices of D not on ∂D: the admissible support of a perturbation.
pub fn d_interior_nodes(mesh: &MeshedDomain) -> Vec<bool> {
    let d = mesh.cells_in(RegionSet::D);
    let mut mask = mesh.vertex_mask(&d);
    let outside = mesh.cells_in(RegionSet::OUTSIDE_D);
    for &c in outside.cells() {
        for &v in mesh.cell(c) {
            mask[v] = false;
        }
    }
    for v in mesh.boundary_nodes_of(&d) {
        mask[v] = false;
    }
    mask
}

/// γ₀ + t·bump, with the bump supported strictly inside D. Returns the new
/// field and ‖γ − γ₀‖_∞ over the vertices.
pub fn perturb_in_d(
    mesh: &MeshedDomain,
    gamma0: &ConductivityField,
    bump: &Bump,
    amplitude: f64,
) -> Result<(ConductivityField, f64)> {
    if !(bump.radius > 0.0) {
        return Err(Error::Conductivity { key: "bump.radius", reason: format!("must be positive, got {}", bump.radius) });
    }
    if !amplitude.is_finite() {
        return Err(Error::Conductivity { key: "amplitude", reason: "must be finite".into() });
    }
    let inside = d_interior_nodes(mesh);
    let (centre, _) = mesh
        .nearest_vertex(&bump.centre, |v| inside[v])
        .ok_or_else(|| Error::EmptyRegion("D has no interior vertex".into()))?;
    let c = mesh.vertex(centre);
    let mut values = gamma0.values.clone();
    let mut gap = 0.0f64;
    for (v, p) in mesh.vertices().iter().enumerate() {
        let b = bump.shape.profile(simplex::dist(p, &c) / bump.radius);
        if b == 0.0 {
            continue;
        }
        if !inside[v] {
            return Err(Error::Conductivity {
                key: "bump.radius",
                reason: format!("bump support reaches vertex {v}, which is not strictly inside D"),
            });
        }
        values[v] = gamma0.values[v] + amplitude * b;
        gap = gap.max((values[v] - gamma0.values[v]).abs());
    }
    let field = ConductivityField::new(mesh, values, gamma0.lambda, gamma0.e_bound).map_err(|e| match e {
        Error::Conductivity { reason, .. } => Error::Conductivity { key: "amplitude", reason },
        other => other,
    })?;
    Ok((field, gap))
}

/// max(|γ|, edge difference quotients) over the cells, with a vertex where
/// the maximum is attained.
fn first_order_surrogate(mesh: &MeshedDomain, values: &[f64], cells: &CellSet) -> (f64, Option<usize>) {
    let mut best = (0.0, None);
    let mut bump = |val: f64, v: usize| {
        if best.1.is_none() || val > best.0 {
            best = (val, Some(v));
        }
    };
    for &c in cells.cells() {
        let verts = mesh.cell(c);
        for (i, &a) in verts.iter().enumerate() {
            bump(values[a].abs(), a);
            for &b in &verts[i + 1..] {
                let q = (values[a] - values[b]).abs() / simplex::dist(&mesh.vertex(a), &mesh.vertex(b));
                bump(q, a.min(b));
            }
        }
    }
    best
}

/// Adds the second-order term to the first-order surrogate: jumps of the
/// piecewise-constant gradient across interior facets divided by the
/// distance between the adjacent barycentres.
fn second_order_surrogate(mesh: &MeshedDomain, values: &[f64], cells: &CellSet) -> (f64, Option<usize>) {
    let mut best = first_order_surrogate(mesh, values, cells);
    let grad = |c: usize| -> Point {
        let (_, g) = simplex::p1_gradients(mesh.dim(), &mesh.cell_points(c)).expect("mesh cells are nondegenerate");
        let mut out = [0.0; 3];
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            for d in 0..3 {
                out[d] += values[v] * g[k][d];
            }
        }
        out
    };
    let inside: Vec<bool> = {
        let mut m = vec![false; mesh.n_cells()];
        cells.cells().iter().for_each(|&c| m[c] = true);
        m
    };
    for &c in cells.cells() {
        let gc = grad(c);
        let verts = mesh.cell(c);
        for skip in 0..verts.len() {
            let facet: Vec<usize> = verts.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            for nb in mesh.facet_neighbors(&facet) {
                if nb <= c || !inside[nb] {
                    continue;
                }
                let gn = grad(nb);
                let jump = simplex::norm3(&simplex::sub(&gc, &gn));
                let q = jump / simplex::dist(&mesh.barycenter(c), &mesh.barycenter(nb));
                if best.1.is_none() || q > best.0 {
                    best = (q, Some(facet[0]));
                }
            }
        }
    }
    best
}

const MAGIC: &str = "eitlab-field";
const VERSION: &str = "1";

/// Plain-text field dump: header, `meta lambda|E|E1 <value>`, then one
/// `value <x>` record per vertex in mesh order.
pub fn dump_field(field: &ConductivityField) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    push_record(&mut out, "meta lambda", [field.lambda]);
    push_record(&mut out, "meta E", [field.e_bound]);
    push_record(&mut out, "meta E1", [field.e1]);
    for &v in &field.values {
        push_record(&mut out, "value", [v]);
    }
    out
}

/// Raw contents of a field dump, before it is matched against a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub e_bound: f64,
    pub e1: Option<f64>,
}

pub fn parse_field(text: &str) -> Result<FieldDump> {
    let mut recs = records(text);
    expect_header(&mut recs, MAGIC, VERSION)?;
    let (mut lambda, mut e_bound, mut e1) = (None, None, None);
    let mut values = Vec::new();
    for (line, toks) in recs {
        match toks[0] {
            "meta" => {
                arity(&toks, 3, line)?;
                let v = f64_at(&toks, 2, line)?;
                match toks[1] {
                    "lambda" => lambda = Some(v),
                    "E" => e_bound = Some(v),
                    "E1" => e1 = Some(v),
                    other => return Err(Error::parse(line, format!("unknown meta key `{other}`"))),
                }
            }
            "value" => {
                arity(&toks, 2, line)?;
                values.push(f64_at(&toks, 1, line)?);
            }
            other => return Err(Error::parse(line, format!("unknown record `{other}`"))),
        }
    }
    Ok(FieldDump {
        values,
        lambda: lambda.ok_or_else(|| Error::parse(0, "missing `meta lambda`"))?,
        e_bound: e_bound.ok_or_else(|| Error::parse(0, "missing `meta E`"))?,
        e1,
    })
}

/// Parses a field dump and validates it against `mesh`. The stored E₁ is
/// informational; it is re-measured.
pub fn load_field(mesh: &MeshedDomain, text: &str) -> Result<ConductivityField> {
    let dump = parse_field(text)?;
    ConductivityField::new(mesh, dump.values, dump.lambda, dump.e_bound)
}
