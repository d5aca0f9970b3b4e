//! The cross-conductivity kernel
//! `S(z, w) = ∫_D (γ₁−γ₂) ∇G₁(·,z)·∇G₂(·,w)` for sources outside D̄,
//! evaluated from discrete Green's functions or through the local DtN gap,
//! with normal derivatives on ∂D̃ and discrete harmonicity diagnostics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dtn::{local_dofs, BoundaryOperator};
use crate::error::{Error, Result};
use crate::geometry::{MeshedDomain, NodalPoint, RegionSet};
use crate::parallel::try_map_indexed;
use crate::pde::{assemble, GreenSolver};
use crate::simplex::{self, Point};
use crate::solver::SolverConfig;
use crate::sparse::CsrMatrix;

/// Largest distance between a differencing target and the node it snaps to,
/// in units of the mesh size.
const STENCIL_SNAP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Direct,
    Pairing,
}

/// Which source varies in a field `S(·, w)` or `S(z, ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Z,
    W,
}

/// Green's function of one conductivity, kept only where it is used: on the
/// nodes of D̄ and on the local DtN dofs.
#[derive(Debug)]
struct GreenColumn {
    on_d: Vec<f64>,
    on_sigma: Vec<f64>,
}

/// Evaluator for one ordered pair (γ₁, γ₂). Green's functions are cached by
/// snapped source node.
#[derive(Debug)]
pub struct SKernel<'m> {
    mesh: &'m MeshedDomain,
    green: [GreenSolver; 2],
    /// (γ₁−γ₂)-weighted stiffness over D, restricted to the nodes of D̄.
    k_dd: CsrMatrix,
    d_nodes: Vec<usize>,
    d_index: Vec<Option<usize>>,
    /// Nodes of D̄′.
    dprime: Vec<bool>,
    sigma_dofs: Vec<usize>,
    cache: [Mutex<HashMap<usize, Arc<GreenColumn>>>; 2],
    threads: usize,
}

/// A kernel sample on a point grid. Derivative matrices are present only for
/// samples on ∂D̃.
#[derive(Debug, Clone)]
pub struct SKernelSample {
    pub z_nodes: Vec<usize>,
    pub w_nodes: Vec<usize>,
    pub values: DMatrix<f64>,
    pub ds_dnu_z: Option<DMatrix<f64>>,
    pub ds_dnu_w: Option<DMatrix<f64>>,
    pub d2s_dnu_z_dnu_w: Option<DMatrix<f64>>,
    pub method: KernelMethod,
    /// Surface nodes whose differencing stencil left Ω̃ ∖ D̄′.
    pub rejected: Vec<usize>,
    pub step: Option<f64>,
}

/// Weak residual of `div(γ₀∇·)` applied to a nodal field, over the hat
/// functions of the interior nodes of Ω̃ ∖ D̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    /// Max over rows of `|Σ_j K_ij s_j| / Σ_j |K_ij s_j|`.
    pub max_relative: f64,
    pub rows: usize,
}

/// A surface node with its two differencing neighbours along the normal.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    node: usize,
    plus: usize,
    minus: usize,
    /// Signed normal offsets of `plus` and `minus`.
    offsets: [f64; 2],
}

impl<'m> SKernel<'m> {
    pub fn new(
        mesh: &'m MeshedDomain,
        gamma1: &[f64],
        gamma2: &[f64],
        config: SolverConfig,
        threads: usize,
    ) -> Result<Self> {
        if gamma1.len() != mesh.n_vertices() || gamma2.len() != mesh.n_vertices() {
            return Err(Error::Dimension("conductivities must have one value per vertex".into()));
        }
        let d_cells = mesh.cells_in(RegionSet::D);
        let delta: Vec<f64> = gamma1.iter().zip(gamma2).map(|(a, b)| a - b).collect();
        let k_delta = assemble(mesh, &delta, &d_cells)?;
        let d_nodes = mesh.nodes_of(&d_cells);
        let mut d_index = vec![None; mesh.n_vertices()];
        for (k, &v) in d_nodes.iter().enumerate() {
            d_index[v] = Some(k);
        }
        let k_dd = k_delta.submatrix(&d_nodes, &d_index, d_nodes.len());
        let dprime = mesh.vertex_mask(&mesh.cells_in(RegionSet::DPRIME));
        Ok(SKernel {
            mesh,
            green: [GreenSolver::new(mesh, gamma1, config)?, GreenSolver::new(mesh, gamma2, config)?],
            k_dd,
            d_nodes,
            d_index,
            dprime,
            sigma_dofs: local_dofs(mesh),
            cache: [Mutex::new(HashMap::new()), Mutex::new(HashMap::new())],
            threads: threads.max(1),
        })
    }

    pub fn mesh(&self) -> &MeshedDomain {
        self.mesh
    }

    /// Nodes of D̄, where the kernel's integrand lives.
    pub fn d_nodes(&self) -> &[usize] {
        &self.d_nodes
    }

    /// Dofs of the local DtN map, the support of the Green traces.
    pub fn sigma_dofs(&self) -> &[usize] {
        &self.sigma_dofs
    }

    /// Nearest admissible source node: interior to Ω̃ and off D̄.
    pub fn snap(&self, p: &Point) -> Result<usize> {
        let (node, _) = self.green[0].snap(self.mesh, p)?;
        if self.d_index[node].is_some() {
            return Err(Error::Point(format!("source {p:?} snaps to vertex {node} in the closure of D")));
        }
        Ok(node)
    }

    fn check_source(&self, v: usize) -> Result<()> {
        if v >= self.mesh.n_vertices() || !self.green[0].problem().is_interior(v) {
            return Err(Error::Point(format!("vertex {v} is not interior to the augmented domain")));
        }
        if self.d_index[v].is_some() {
            return Err(Error::Point(format!("vertex {v} lies in the closure of D")));
        }
        Ok(())
    }

    /// Cached Green's functions of conductivity `which` for the given source
    /// nodes, solving the missing ones in parallel.
    fn columns(&self, which: usize, nodes: &[usize]) -> Result<Vec<Arc<GreenColumn>>> {
        let mut missing: Vec<usize> = {
            let cache = self.cache[which].lock().expect("cache lock");
            nodes.iter().copied().filter(|v| !cache.contains_key(v)).collect()
        };
        missing.sort_unstable();
        missing.dedup();
        let solved = try_map_indexed(missing.len(), self.threads, |i| {
            let g = self.green[which].at_node(missing[i])?;
            Ok::<_, Error>(Arc::new(GreenColumn {
                on_d: self.d_nodes.iter().map(|&v| g.values[v]).collect(),
                on_sigma: self.sigma_dofs.iter().map(|&v| g.values[v]).collect(),
            }))
        })?;
        let mut cache = self.cache[which].lock().expect("cache lock");
        for (v, col) in missing.into_iter().zip(solved) {
            cache.entry(v).or_insert(col);
        }
        Ok(nodes.iter().map(|v| Arc::clone(&cache[v])).collect())
    }

    /// `S` for snapped source nodes.
    pub fn s_direct_nodes(&self, z: usize, w: usize) -> Result<f64> {
        self.check_source(z)?;
        self.check_source(w)?;
        let g1 = self.columns(0, &[z])?.pop().expect("one column");
        let g2 = self.columns(1, &[w])?.pop().expect("one column");
        Ok(self.k_dd.bilinear(&g1.on_d, &g2.on_d))
    }

    /// `S(z, w)` by cellwise integration over D with sources snapped to nodes.
    pub fn s_direct(&self, z: &Point, w: &Point) -> Result<f64> {
        self.s_direct_nodes(self.snap(z)?, self.snap(w)?)
    }

    /// `S(z, w)` for z, w ∈ B_{ρ₁}(Q) as `⟨(Λ₁^Σ − Λ₂^Σ) G₁(·,z), G₂(·,w)⟩`,
    /// given the local DtN gap.
    pub fn s_via_pairing(&self, z: &Point, w: &Point, local_gap: &BoundaryOperator) -> Result<f64> {
        let (t1, t2) = self.traces(z, w)?;
        if local_gap.dofs() != self.sigma_dofs.as_slice() {
            return Err(Error::Dimension("operator does not live on the local DtN dofs".into()));
        }
        Ok(local_gap.pairing(&t1, &t2))
    }

    /// Traces on the local DtN dofs of G₁(·,z) and G₂(·,w), for sources in
    /// B_{ρ₁}(Q).
    pub fn traces(&self, z: &Point, w: &Point) -> Result<(Vec<f64>, Vec<f64>)> {
        let meta = self.mesh.meta();
        for p in [z, w] {
            if simplex::dist(p, &meta.q) >= meta.rho1 {
                return Err(Error::Point(format!("{p:?} lies outside the ball B(Q, rho1)")));
            }
        }
        let g1 = self.columns(0, &[self.snap(z)?])?.pop().expect("one column");
        let g2 = self.columns(1, &[self.snap(w)?])?.pop().expect("one column");
        Ok((g1.on_sigma.clone(), g2.on_sigma.clone()))
    }

    /// Matrix of `S` over source node lists, computed as `G₁ᵀ K_Δ G₂`.
    pub fn s_matrix(&self, zs: &[usize], ws: &[usize]) -> Result<DMatrix<f64>> {
        for &v in zs.iter().chain(ws) {
            self.check_source(v)?;
        }
        let g1 = self.columns(0, zs)?;
        let g2 = self.columns(1, ws)?;
        let nd = self.d_nodes.len();
        let a = DMatrix::from_fn(nd, zs.len(), |i, j| g1[j].on_d[i]);
        let mut b = DMatrix::zeros(nd, ws.len());
        for (j, col) in g2.iter().enumerate() {
            b.set_column(j, &DVector::from_vec(self.k_dd.mul_vec(&col.on_d)));
        }
        Ok(a.transpose() * b)
    }

    /// Direct or pairing sample on two point lists (no derivatives).
    pub fn sample(
        &self,
        zs: &[Point],
        ws: &[Point],
        method: KernelMethod,
        local_gap: Option<&BoundaryOperator>,
    ) -> Result<SKernelSample> {
        let z_nodes: Vec<usize> = zs.iter().map(|p| self.snap(p)).collect::<Result<_>>()?;
        let w_nodes: Vec<usize> = ws.iter().map(|p| self.snap(p)).collect::<Result<_>>()?;
        let values = match method {
            KernelMethod::Direct => self.s_matrix(&z_nodes, &w_nodes)?,
            KernelMethod::Pairing => {
                let gap = local_gap.ok_or_else(|| Error::Degenerate("pairing needs the local DtN gap".into()))?;
                let mut m = DMatrix::zeros(zs.len(), ws.len());
                for (i, z) in zs.iter().enumerate() {
                    for (j, w) in ws.iter().enumerate() {
                        m[(i, j)] = self.s_via_pairing(z, w, gap)?;
                    }
                }
                m
            }
        };
        Ok(SKernelSample {
            z_nodes,
            w_nodes,
            values,
            ds_dnu_z: None,
            ds_dnu_w: None,
            d2s_dnu_z_dnu_w: None,
            method,
            rejected: Vec::new(),
            step: None,
        })
    }

    /// Default differencing step: 2h, the smallest admissible one. The
    /// differencing error is O(step²) and dominates the surface quadrature
    /// error, so the step is refined together with the mesh.
    pub fn default_step(mesh: &MeshedDomain) -> f64 {
        2.0 * mesh.meta().mesh_size
    }

    fn in_shell(&self, v: usize) -> bool {
        !self.dprime[v] && self.green[0].problem().is_interior(v)
    }

    fn stencil(&self, p: &NodalPoint, step: f64) -> Option<Stencil> {
        if !self.in_shell(p.node) {
            return None;
        }
        let x = self.mesh.vertex(p.node);
        let h = self.mesh.meta().mesh_size;
        let mut found = [0usize; 2];
        let mut offsets = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let target = [0, 1, 2].map(|d| x[d] + sign * step * p.normal[d]);
            let (v, dist) = self.mesh.nearest_vertex(&target, |_| true)?;
            if dist > STENCIL_SNAP * h || !self.in_shell(v) {
                return None;
            }
            found[k] = v;
            offsets[k] = simplex::dot3(&simplex::sub(&self.mesh.vertex(v), &x), &p.normal);
        }
        Some(Stencil { node: p.node, plus: found[0], minus: found[1], offsets })
    }

    /// S and its normal derivatives on surface nodes by central differences
    /// in the source positions. Points whose stencil leaves Ω̃ ∖ D̄′ are
    /// listed in `rejected` and omitted.
    pub fn s_normal_derivatives(&self, surface: &[NodalPoint], step: f64) -> Result<SKernelSample> {
        let meta = self.mesh.meta();
        let h = meta.mesh_size;
        if !(step >= 2.0 * h * (1.0 - 1e-9) && step <= 0.25 * meta.rho2 * (1.0 + 1e-9)) {
            return Err(Error::Degenerate(format!(
                "differencing step {step} outside [2h, rho2/4] = [{}, {}]",
                2.0 * h,
                0.25 * meta.rho2
            )));
        }
        let mut stencils = Vec::new();
        let mut rejected = Vec::new();
        for p in surface {
            match self.stencil(p, step) {
                Some(s) => stencils.push(s),
                None => rejected.push(p.node),
            }
        }
        if stencils.is_empty() {
            return Err(Error::Point("every surface point was rejected".into()));
        }
        let mut sources: Vec<usize> = stencils.iter().flat_map(|s| [s.node, s.plus, s.minus]).collect();
        sources.sort_unstable();
        sources.dedup();
        let pos = |v: usize| sources.binary_search(&v).expect("stencil node is a source");
        let full = self.s_matrix(&sources, &sources)?;
        let n = stencils.len();
        let at = |a: usize, b: usize| full[(pos(a), pos(b))];
        let values = DMatrix::from_fn(n, n, |i, j| at(stencils[i].node, stencils[j].node));
        let dz = DMatrix::from_fn(n, n, |i, j| {
            let (s, w) = (&stencils[i], stencils[j].node);
            (at(s.plus, w) - at(s.minus, w)) / (s.offsets[0] - s.offsets[1])
        });
        let dw = DMatrix::from_fn(n, n, |i, j| {
            let (z, s) = (stencils[i].node, &stencils[j]);
            (at(z, s.plus) - at(z, s.minus)) / (s.offsets[0] - s.offsets[1])
        });
        let dzw = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (&stencils[i], &stencils[j]);
            (at(a.plus, b.plus) - at(a.plus, b.minus) - at(a.minus, b.plus) + at(a.minus, b.minus))
                / ((a.offsets[0] - a.offsets[1]) * (b.offsets[0] - b.offsets[1]))
        });
        let nodes: Vec<usize> = stencils.iter().map(|s| s.node).collect();
        Ok(SKernelSample {
            z_nodes: nodes.clone(),
            w_nodes: nodes,
            values,
            ds_dnu_z: Some(dz),
            ds_dnu_w: Some(dw),
            d2s_dnu_z_dnu_w: Some(dzw),
            method: KernelMethod::Direct,
            rejected,
            step: Some(step),
        })
    }

    /// The nodal field z ↦ S(z, w) (or w ↦ S(z, w)) on all of Ω̃, obtained
    /// from one adjoint solve: by symmetry of G₁,
    /// `S(·, w) = K₁⁻¹ K_Δ G₂(·, w)`.
    pub fn field(&self, fixed: &Point, variable: Variable) -> Result<Vec<f64>> {
        let node = self.snap(fixed)?;
        let (solve_with, column_of) = match variable {
            Variable::Z => (0, 1),
            Variable::W => (1, 0),
        };
        let g = self.columns(column_of, &[node])?.pop().expect("one column");
        let r = self.k_dd.mul_vec(&g.on_d);
        let loads: Vec<(usize, f64)> = self.d_nodes.iter().copied().zip(r).collect();
        let problem = self.green[solve_with].problem();
        let zeros = vec![0.0; problem.boundary().len()];
        Ok(problem.solve_with_loads(&zeros, &loads)?.values)
    }

    /// Weak residual of `div(γ₀∇ S)` in the varying source, away from D̄.
    pub fn elliptic_residual(&self, gamma0: &[f64], fixed: &Point, variable: Variable) -> Result<ResidualReport> {
        let s = self.field(fixed, variable)?;
        let k0 = assemble(self.mesh, gamma0, &self.mesh.cells_in(RegionSet::OMEGA_TILDE))?;
        let problem = self.green[0].problem();
        let mut report = ResidualReport { max_abs: 0.0, max_relative: 0.0, rows: 0 };
        for &i in problem.interior() {
            if self.d_index[i].is_some() {
                continue;
            }
            let (r, scale) = k0.row_residual_scale(i, &s);
            report.rows += 1;
            report.max_abs = report.max_abs.max(r.abs());
            if scale > 0.0 {
                report.max_relative = report.max_relative.max(r.abs() / scale);
            }
        }
        Ok(report)
    }
}

impl SKernelSample {
    /// CSV with one row per (z, w) pair; derivative columns are empty when
    /// absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_index,w_index,z_node,w_node,s,ds_dnu_z,ds_dnu_w,d2s_dnu_z_dnu_w\n");
        let cell = |m: &Option<DMatrix<f64>>, i: usize, j: usize| m.as_ref().map(|m| format!("{:e}", m[(i, j)])).unwrap_or_default();
        for i in 0..self.z_nodes.len() {
            for j in 0..self.w_nodes.len() {
                let _ = writeln!(
                    out,
                    "{i},{j},{},{},{:e},{},{},{}",
                    self.z_nodes[i],
                    self.w_nodes[j],
                    self.values[(i, j)],
                    cell(&self.ds_dnu_z, i, j),
                    cell(&self.ds_dnu_w, i, j),
                    cell(&self.d2s_dnu_z_dnu_w, i, j),
                );
            }
        }
        out
    }

    /// max |S| over the sample.
    pub fn sup(&self) -> f64 {
        self.values.amax()
    }
}

#[cfg(test)]
mod tests;
