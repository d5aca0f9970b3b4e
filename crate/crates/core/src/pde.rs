//! Piecewise-linear Galerkin discretization of div(γ∇u) = 0: stiffness
//! assembly, Dirichlet solves on tagged subdomains, variational co-normal
//! fluxes and point-source Green's functions on Ω̃.

use crate::error::{Error, Result};
use crate::geometry::{CellSet, MeshedDomain, RegionSet};
use crate::simplex::{self, Point};
use crate::solver::{SolveStats, SolverConfig, SpdSolver};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Global stiffness matrix (vertex-indexed) of the bilinear form
/// `∫ γ ∇u·∇v` over `cells`. Each cell uses the mean of its vertex values,
/// so the matrix is linear in the vertex values and the quadratic form of
/// any affine function is exact.
pub fn assemble(mesh: &MeshedDomain, gamma: &[f64], cells: &CellSet) -> Result<CsrMatrix> {
    if gamma.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!("{} coefficient values for {} vertices", gamma.len(), mesh.n_vertices())));
    }
    let n = mesh.n_vertices();
    let npc = mesh.dim() + 1;
    let mut b = TripletBuilder::with_capacity(n, n, cells.len() * npc * npc);
    for &c in cells.cells() {
        let verts = mesh.cell(c);
        let (measure, grads) = simplex::p1_gradients(mesh.dim(), &mesh.cell_points(c))
            .ok_or_else(|| Error::Mesh(format!("cell {c} is degenerate")))?;
        let g = verts.iter().map(|&v| gamma[v]).sum::<f64>() / npc as f64;
        for i in 0..npc {
            for j in 0..npc {
                b.push(verts[i], verts[j], g * measure * simplex::dot3(&grads[i], &grads[j]));
            }
        }
    }
    Ok(b.build())
}

/// A Dirichlet problem on a cell set: the boundary nodes of the set carry
/// prescribed values, the remaining nodes are unknowns. The interior block
/// is factored once and reused across right-hand sides.
#[derive(Debug)]
pub struct DirichletProblem {
    stiffness: CsrMatrix,
    nodes: Vec<usize>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// Vertex → position in `interior`.
    interior_index: Vec<Option<usize>>,
    /// Vertex → position in `boundary`.
    boundary_index: Vec<Option<usize>>,
    k_ib: CsrMatrix,
    solver: SpdSolver,
}

/// Nodal values of a solve over the whole mesh (zero off the region).
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

impl DirichletProblem {
    pub fn new(mesh: &MeshedDomain, gamma: &[f64], cells: &CellSet, config: SolverConfig) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyRegion("Dirichlet problem on an empty cell set".into()));
        }
        let stiffness = assemble(mesh, gamma, cells)?;
        let nodes = mesh.nodes_of(cells);
        let boundary = mesh.boundary_nodes_of(cells);
        let n = mesh.n_vertices();
        let mut boundary_index = vec![None; n];
        for (k, &v) in boundary.iter().enumerate() {
            boundary_index[v] = Some(k);
        }
        let interior: Vec<usize> = nodes.iter().copied().filter(|&v| boundary_index[v].is_none()).collect();
        if interior.is_empty() {
            return Err(Error::EmptyRegion("region has no interior nodes".into()));
        }
        let mut interior_index = vec![None; n];
        for (k, &v) in interior.iter().enumerate() {
            interior_index[v] = Some(k);
        }
        let k_ii = stiffness.submatrix(&interior, &interior_index, interior.len());
        let k_ib = stiffness.submatrix(&interior, &boundary_index, boundary.len());
        let coords: Vec<Point> = interior.iter().map(|&v| mesh.vertex(v)).collect();
        let solver = SpdSolver::new(k_ii, Some(&coords), mesh.dim(), config)?;
        Ok(DirichletProblem { stiffness, nodes, interior, boundary, interior_index, boundary_index, k_ib, solver })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Dirichlet nodes, sorted.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_interior(&self, v: usize) -> bool {
        self.interior_index.get(v).is_some_and(|i| i.is_some())
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_index.get(v).is_some_and(|i| i.is_some())
    }

    pub fn boundary_position(&self, v: usize) -> Option<usize> {
        self.boundary_index.get(v).copied().flatten()
    }

    pub fn uses_direct_solver(&self) -> bool {
        self.solver.is_direct()
    }

    /// Solves with the given values on `boundary()` (same order) and point
    /// loads `(vertex, weight)` at interior vertices.
    pub fn solve_with_loads(&self, boundary_values: &[f64], loads: &[(usize, f64)]) -> Result<FieldSolution> {
        if boundary_values.len() != self.boundary.len() {
            return Err(Error::Dimension(format!(
                "{} boundary values for {} boundary nodes",
                boundary_values.len(),
                self.boundary.len()
            )));
        }
        let mut rhs = self.k_ib.mul_vec(boundary_values);
        rhs.iter_mut().for_each(|r| *r = -*r);
        for &(v, w) in loads {
            let i = self.interior_index.get(v).copied().flatten().ok_or_else(|| {
                Error::Point(format!("point load at vertex {v}, which is not an interior node of the region"))
            })?;
            rhs[i] += w;
        }
        let (x, stats) = self.solver.solve(&rhs)?;
        let mut values = vec![0.0; self.interior_index.len()];
        for (k, &v) in self.interior.iter().enumerate() {
            values[v] = x[k];
        }
        for (k, &v) in self.boundary.iter().enumerate() {
            values[v] = boundary_values[k];
        }
        Ok(FieldSolution { values, stats })
    }

    pub fn solve(&self, boundary_values: &[f64]) -> Result<FieldSolution> {
        self.solve_with_loads(boundary_values, &[])
    }

    /// Dirichlet data sampled from a function of position.
    pub fn boundary_data(&self, mesh: &MeshedDomain, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.boundary.iter().map(|&v| f(&mesh.vertex(v))).collect()
    }

    /// Variational co-normal flux of a solution: one coefficient per
    /// boundary node, `f_b = Σ_j a(φ_b, φ_j) u_j`. Pairing with a trace ψ
    /// equals `∫ γ∇u·∇(Eψ)` for every extension Eψ, since the residual
    /// vanishes at interior nodes.
    pub fn conormal_flux(&self, solution: &FieldSolution) -> Vec<f64> {
        self.boundary
            .iter()
            .map(|&b| {
                let (cols, vals) = self.stiffness.row(b);
                cols.iter().zip(vals).map(|(&j, &a)| a * solution.values[j]).sum()
            })
            .collect()
    }

    /// Max over interior nodes of |(K u)_i| relative to Σ_j |K_ij u_j|.
    pub fn interior_residual(&self, values: &[f64]) -> f64 {
        self.interior
            .iter()
            .map(|&i| {
                let (r, s) = self.stiffness.row_residual_scale(i, values);
                if s > 0.0 {
                    r.abs() / s
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Discrete Green's functions on Ω̃: unit point load at a node and zero
/// Dirichlet data on ∂Ω̃.
#[derive(Debug)]
pub struct GreenSolver {
    problem: DirichletProblem,
}

#[derive(Debug, Clone)]
pub struct GreensFunction {
    /// Snapped source node.
    pub source: usize,
    /// Distance from the requested point to the source node.
    pub snap_distance: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

impl GreenSolver {
    pub fn new(mesh: &MeshedDomain, gamma: &[f64], config: SolverConfig) -> Result<Self> {
        Ok(GreenSolver { problem: DirichletProblem::new(mesh, gamma, &mesh.cells_in(RegionSet::OMEGA_TILDE), config)? })
    }

    pub fn problem(&self) -> &DirichletProblem {
        &self.problem
    }

    /// Nearest node to `y` that is not on ∂Ω̃.
    pub fn snap(&self, mesh: &MeshedDomain, y: &Point) -> Result<(usize, f64)> {
        mesh.nearest_vertex(y, |v| self.problem.is_interior(v))
            .ok_or_else(|| Error::Point("augmented domain has no interior node".into()))
    }

    /// Green's function with source at node `y`.
    pub fn at_node(&self, y: usize) -> Result<GreensFunction> {
        if !self.problem.is_interior(y) {
            return Err(Error::Point(format!("source vertex {y} lies on the outer boundary or outside the mesh")));
        }
        let zeros = vec![0.0; self.problem.boundary.len()];
        let sol = self.problem.solve_with_loads(&zeros, &[(y, 1.0)])?;
        Ok(GreensFunction { source: y, snap_distance: 0.0, values: sol.values, stats: sol.stats })
    }

    /// Green's function with the source snapped to the nearest interior node.
    pub fn at_point(&self, mesh: &MeshedDomain, y: &Point) -> Result<GreensFunction> {
        let (node, d) = self.snap(mesh, y)?;
        let mut g = self.at_node(node)?;
        g.snap_distance = d;
        Ok(g)
    }
}

/// `∫_{Ω̃ ∖ B_r(y)} |∇G|²`. Cells entirely inside or outside the ball are
/// exact; cells cut by the sphere use the fraction of a fixed interior
/// lattice of the reference simplex lying outside the ball.
pub fn energy_annulus(mesh: &MeshedDomain, values: &[f64], y: &Point, r: f64) -> f64 {
    const LATTICE: usize = 12;
    let lattice = reference_lattice(mesh.dim(), LATTICE);
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let pts = mesh.cell_points(c);
        let dists: Vec<f64> = pts.iter().map(|p| simplex::dist(p, y)).collect();
        if dists.iter().all(|&d| d <= r) {
            continue;
        }
        let bary = simplex::barycenter(&pts);
        let spread = pts.iter().map(|p| simplex::dist(p, &bary)).fold(0.0, f64::max);
        let fraction = if simplex::dist(&bary, y) - spread >= r {
            1.0
        } else {
            let outside = lattice
                .iter()
                .filter(|l| {
                    let mut p = pts[0];
                    for (k, &lk) in l.iter().enumerate() {
                        for d in 0..3 {
                            p[d] += lk * (pts[k + 1][d] - pts[0][d]);
                        }
                    }
                    simplex::dist(&p, y) > r
                })
                .count();
            outside as f64 / lattice.len() as f64
        };
        if fraction == 0.0 {
            continue;
        }
        let (measure, grads) = simplex::p1_gradients(mesh.dim(), &pts).expect("mesh cells are nondegenerate");
        let mut g = [0.0; 3];
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            for d in 0..3 {
                g[d] += values[v] * grads[k][d];
            }
        }
        total += fraction * measure * simplex::dot3(&g, &g);
    }
    total
}

/// Points `((j₁+½)/m, …)` of the reference simplex with coordinate sum < 1.
fn reference_lattice(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let at = |j: usize| (j as f64 + 0.5) / m as f64;
    for i in 0..m {
        for j in 0..m {
            if dim == 2 {
                if at(i) + at(j) < 1.0 {
                    out.push(vec![at(i), at(j)]);
                }
                continue;
            }
            for k in 0..m {
                if at(i) + at(j) + at(k) < 1.0 {
                    out.push(vec![at(i), at(j), at(k)]);
                }
            }
        }
    }
    out
}
