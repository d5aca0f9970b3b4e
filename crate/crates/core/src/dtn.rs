//! Discrete Dirichlet-to-Neumann maps as Schur complements of the P1
//! stiffness, the discrete H^{1/2} Gram matrix, and operator norms in
//! L(H^{1/2}, H^{-1/2}).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, MeshedDomain, RegionSet};
use crate::parallel::try_map_indexed;
use crate::pde::DirichletProblem;
use crate::simplex::{self, Point};
use crate::solver::SolverConfig;
use crate::textio::{arity, expect_header, f64_at, records, usize_at};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtnConfig {
    /// Upper bound on boundary degrees of freedom; the Gram matrix and the
    /// operator are dense.
    pub max_dofs: usize,
}

impl Default for DtnConfig {
    fn default() -> Self {
        DtnConfig { max_dofs: 2000 }
    }
}

/// A discrete DtN map on a set of boundary nodes together with the Gram
/// matrix of the discrete H^{1/2} norm on the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    tag: BoundaryTag,
    dofs: Vec<usize>,
    matrix: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl BoundaryOperator {
    pub fn new(tag: BoundaryTag, dofs: Vec<usize>, matrix: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let n = dofs.len();
        if matrix.shape() != (n, n) || gram.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "{n} dofs but matrix {:?} and Gram {:?}",
                matrix.shape(),
                gram.shape()
            )));
        }
        Ok(BoundaryOperator { tag, dofs, matrix, gram })
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    /// Mesh vertices carrying the degrees of freedom, sorted.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `self − other` over identical degrees of freedom.
    pub fn difference(&self, other: &BoundaryOperator) -> Result<DMatrix<f64>> {
        if self.dofs != other.dofs {
            return Err(Error::Dimension("operators live on different degrees of freedom".into()));
        }
        Ok(&self.matrix - &other.matrix)
    }

    /// `self − other` as an operator with the Gram matrix of `self`.
    pub fn minus(&self, other: &BoundaryOperator) -> Result<BoundaryOperator> {
        BoundaryOperator::new(self.tag, self.dofs.clone(), self.difference(other)?, self.gram.clone())
    }

    /// ‖self‖ in L(H^{1/2}, H^{-1/2}).
    pub fn norm(&self) -> Result<f64> {
        op_norm(&self.matrix, &self.gram)
    }

    /// ‖self − other‖ in L(H^{1/2}, H^{-1/2}).
    pub fn distance(&self, other: &BoundaryOperator) -> Result<f64> {
        op_norm(&self.difference(other)?, &self.gram)
    }

    /// Discrete H^{1/2} norm of a trace given on the dofs.
    pub fn half_norm(&self, phi: &[f64]) -> f64 {
        let v = DVector::from_column_slice(phi);
        (v.dot(&(&self.gram * &v))).max(0.0).sqrt()
    }

    /// `⟨A φ, ψ⟩`.
    pub fn pairing(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let (p, q) = (DVector::from_column_slice(phi), DVector::from_column_slice(psi));
        q.dot(&(&self.matrix * p))
    }

    /// Values of a nodal field at the dofs.
    pub fn trace(&self, values: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&v| values[v]).collect()
    }
}

/// Degrees of freedom of the local map: vertices of Σ̄ none of whose
/// boundary facets lies on ∂Ω ∖ Σ, so their hat functions are supported in Σ̄.
pub fn local_dofs(mesh: &MeshedDomain) -> Vec<usize> {
    let rest = mesh.nodes_on(&[BoundaryTag::OuterRest]);
    let mut dofs = mesh.nodes_on(&[BoundaryTag::Sigma, BoundaryTag::Sigma0]);
    dofs.retain(|v| rest.binary_search(v).is_err());
    dofs
}

/// Λ^Σ: solves on Ω with data supported in Σ, observed on Σ.
pub fn assemble_local_dtn(
    mesh: &MeshedDomain,
    gamma: &[f64],
    solver: SolverConfig,
    config: DtnConfig,
    threads: usize,
) -> Result<BoundaryOperator> {
    let problem = DirichletProblem::new(mesh, gamma, &mesh.cells_in(RegionSet::OMEGA), solver)?;
    let dofs = local_dofs(mesh);
    let facets = [BoundaryTag::Sigma, BoundaryTag::Sigma0];
    assemble_dtn(mesh, &problem, BoundaryTag::Sigma, &facets, dofs, config, threads)
}

/// Λ^{∂D̃}: solves on D̃, all nodes of ∂D̃ are degrees of freedom.
pub fn assemble_full_dtn(
    mesh: &MeshedDomain,
    gamma: &[f64],
    solver: SolverConfig,
    config: DtnConfig,
    threads: usize,
) -> Result<BoundaryOperator> {
    let problem = DirichletProblem::new(mesh, gamma, &mesh.cells_in(RegionSet::DTILDE), solver)?;
    let dofs = mesh.nodes_on(&[BoundaryTag::DDtilde]);
    assemble_dtn(mesh, &problem, BoundaryTag::DDtilde, &[BoundaryTag::DDtilde], dofs, config, threads)
}

/// DtN map of a prepared Dirichlet problem on the given boundary dofs, with
/// zero data on its other boundary nodes. Column `j` is the co-normal flux
/// of the solution with data the hat function of dof `j`.
pub fn assemble_dtn(
    mesh: &MeshedDomain,
    problem: &DirichletProblem,
    tag: BoundaryTag,
    gram_facets: &[BoundaryTag],
    dofs: Vec<usize>,
    config: DtnConfig,
    threads: usize,
) -> Result<BoundaryOperator> {
    let matrix = dtn_matrix(problem, &dofs, config, threads, tag)?;
    let gram = gram_half(mesh, gram_facets, &dofs)?;
    BoundaryOperator::new(tag, dofs, matrix, gram)
}

/// Only the matrix part of [`assemble_dtn`].
pub fn dtn_matrix(
    problem: &DirichletProblem,
    dofs: &[usize],
    config: DtnConfig,
    threads: usize,
    tag: BoundaryTag,
) -> Result<DMatrix<f64>> {
    let n = dofs.len();
    if n == 0 {
        return Err(Error::EmptyRegion(format!("no degrees of freedom on {tag}")));
    }
    if n > config.max_dofs {
        return Err(Error::TooManyDofs { tag: tag.to_string(), count: n, cap: config.max_dofs });
    }
    let positions: Vec<usize> = dofs
        .iter()
        .map(|&v| problem.boundary_position(v).ok_or_else(|| Error::Point(format!("dof {v} is not a boundary node"))))
        .collect::<Result<_>>()?;
    let nb = problem.boundary().len();
    let columns = try_map_indexed(n, threads, |j| {
        let mut data = vec![0.0; nb];
        data[positions[j]] = 1.0;
        let sol = problem.solve(&data).map_err(|e| Error::BasisSolve { index: j, source: Box::new(e) })?;
        let flux = problem.conormal_flux(&sol);
        Ok::<_, Error>(positions.iter().map(|&p| flux[p]).collect::<Vec<f64>>())
    })?;
    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Boundary mass and Laplace–Beltrami stiffness on the facets carrying
/// `tags`, restricted to `dofs`.
pub fn boundary_mass_stiffness(
    mesh: &MeshedDomain,
    tags: &[BoundaryTag],
    dofs: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = dofs.len();
    let mut index = vec![None; mesh.n_vertices()];
    for (k, &v) in dofs.iter().enumerate() {
        index[v] = Some(k);
    }
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let mut any = false;
    for (f, facet) in mesh.facets().iter().enumerate() {
        if !tags.contains(&facet.tag) {
            continue;
        }
        any = true;
        let verts = mesh.facet_verts(f);
        let pts: Vec<Point> = verts.iter().map(|&v| mesh.vertex(v)).collect();
        let (me, ke) = facet_matrices(&pts);
        for (a, &va) in verts.iter().enumerate() {
            let Some(i) = index[va] else { continue };
            for (b, &vb) in verts.iter().enumerate() {
                let Some(j) = index[vb] else { continue };
                m[(i, j)] += me[a][b];
                k[(i, j)] += ke[a][b];
            }
        }
    }
    if !any {
        return Err(Error::EmptyRegion(format!("no facets tagged {tags:?}")));
    }
    Ok((m, k))
}

/// P1 mass and tangential stiffness of a segment or triangle.
fn facet_matrices(pts: &[Point]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    if pts.len() == 2 {
        let l = simplex::dist(&pts[0], &pts[1]);
        (vec![vec![l / 3.0, l / 6.0], vec![l / 6.0, l / 3.0]], vec![vec![1.0 / l, -1.0 / l], vec![-1.0 / l, 1.0 / l]])
    } else {
        let e1 = simplex::sub(&pts[1], &pts[0]);
        let e2 = simplex::sub(&pts[2], &pts[0]);
        let area = simplex::facet_measure(pts);
        let (g11, g12, g22) = (simplex::dot3(&e1, &e1), simplex::dot3(&e1, &e2), simplex::dot3(&e2, &e2));
        let det = g11 * g22 - g12 * g12;
        let inv = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]];
        // Parametric gradients of the barycentric coordinates.
        let d = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut m = vec![vec![0.0; 3]; 3];
        let mut k = vec![vec![0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = area * if a == b { 2.0 } else { 1.0 } / 12.0;
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += d[a][p] * inv[p][q] * d[b][q];
                    }
                }
                k[a][b] = area * s;
            }
        }
        (m, k)
    }
}

fn sym_sqrt(m: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * scale)) {
        return Err(Error::Degenerate("matrix is not positive definite".into()));
    }
    let d = eig.eigenvalues.map(|l| l.powf(power));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Gram matrix of the discrete H^{1/2} norm on `dofs`:
/// `G = M^{1/2} (I + M^{-1/2} K M^{-1/2})^{1/2} M^{1/2}` with M the boundary
/// mass and K the Laplace–Beltrami stiffness on the facets carrying `tags`.
/// A single dof gets the mass-only norm.
pub fn gram_half(mesh: &MeshedDomain, tags: &[BoundaryTag], dofs: &[usize]) -> Result<DMatrix<f64>> {
    if dofs.is_empty() {
        return Err(Error::EmptyRegion(format!("no degrees of freedom on {tags:?}")));
    }
    let (m, k) = boundary_mass_stiffness(mesh, tags, dofs)?;
    gram_from_pencil(&m, &k)
}

pub fn gram_from_pencil(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 1 {
        return Ok(m.clone());
    }
    let m_half = sym_sqrt(m, 0.5)?;
    let m_inv_half = sym_sqrt(m, -0.5)?;
    let c = symmetrize(&m_inv_half * k * &m_inv_half);
    let eig = SymmetricEigen::new(c);
    let d = eig.eigenvalues.map(|l| (1.0 + l.max(0.0)).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    Ok(symmetrize(&m_half * root * &m_half))
}

/// Eigenvalues of the pencil `K v = μ M v`, ascending.
pub fn pencil_eigenvalues(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m_inv_half = sym_sqrt(m, -0.5)?;
    let c = symmetrize(&m_inv_half * k * &m_inv_half);
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `max ⟨Aφ, ψ⟩ / (‖φ‖ ‖ψ‖)` in the Gram norm: the largest singular value of
/// `G^{-1/2} A G^{-1/2}`.
pub fn op_norm(a: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != gram.shape() || a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("operator {:?} against Gram {:?}", a.shape(), gram.shape())));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let w = sym_sqrt(gram, -0.5)?;
    let white = &w * a * &w;
    Ok(white.singular_values().max())
}

/// [`op_norm`] of the block of `a` on a subset of its dofs (positions),
/// measured with the matching Gram block: the norm seen by data supported on
/// a sub-portion.
pub fn restricted_op_norm(a: &DMatrix<f64>, gram: &DMatrix<f64>, subset: &[usize]) -> Result<f64> {
    let pick = |m: &DMatrix<f64>| DMatrix::from_fn(subset.len(), subset.len(), |i, j| m[(subset[i], subset[j])]);
    op_norm(&pick(a), &pick(gram))
}

const MAGIC: &str = "eitlab-operator";
const VERSION: &str = "1";
/// Largest dense operator accepted by the parser.
pub const MAX_PARSED_DOFS: usize = 4096;

/// Plain-text operator dump:
///
/// ```text
/// eitlab-operator 1
/// tag <Sigma|dDtilde|...>
/// dofs <n>
/// dof <vertex>            (n records)
/// matrix
/// row <a_i1> ... <a_in>   (n records)
/// gram
/// row <g_i1> ... <g_in>   (n records)
/// ```
pub fn dump_operator(op: &BoundaryOperator) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "tag {}", op.tag);
    let _ = writeln!(out, "dofs {}", op.dofs.len());
    for v in &op.dofs {
        let _ = writeln!(out, "dof {v}");
    }
    for (name, m) in [("matrix", &op.matrix), ("gram", &op.gram)] {
        let _ = writeln!(out, "{name}");
        for i in 0..m.nrows() {
            out.push_str("row");
            for j in 0..m.ncols() {
                let _ = write!(out, " {:?}", m[(i, j)]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn load_operator(text: &str) -> Result<BoundaryOperator> {
    let mut recs = records(text);
    expect_header(&mut recs, MAGIC, VERSION)?;
    let mut next = |what: &str| recs.next().ok_or_else(|| Error::parse(0, format!("unexpected end of input, expected {what}")));
    let (line, toks) = next("tag")?;
    if toks[0] != "tag" {
        return Err(Error::parse(line, "expected `tag`"));
    }
    arity(&toks, 2, line)?;
    let tag = BoundaryTag::parse(toks[1]).ok_or_else(|| Error::parse(line, format!("unknown tag `{}`", toks[1])))?;
    let (line, toks) = next("dofs")?;
    if toks[0] != "dofs" {
        return Err(Error::parse(line, "expected `dofs`"));
    }
    arity(&toks, 2, line)?;
    let n = usize_at(&toks, 1, line)?;
    if n == 0 || n > MAX_PARSED_DOFS {
        return Err(Error::parse(line, format!("dof count {n} outside 1..={MAX_PARSED_DOFS}")));
    }
    let mut dofs = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, toks) = next("dof")?;
        if toks[0] != "dof" {
            return Err(Error::parse(line, "expected `dof`"));
        }
        arity(&toks, 2, line)?;
        dofs.push(usize_at(&toks, 1, line)?);
    }
    if dofs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parse(0, "dofs must be strictly increasing"));
    }
    let mut blocks = Vec::new();
    for name in ["matrix", "gram"] {
        let (line, toks) = next(name)?;
        if toks != [name] {
            return Err(Error::parse(line, format!("expected `{name}`")));
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let (line, toks) = next("row")?;
            if toks[0] != "row" {
                return Err(Error::parse(line, "expected `row`"));
            }
            arity(&toks, n + 1, line)?;
            for j in 0..n {
                m[(i, j)] = f64_at(&toks, j + 1, line)?;
            }
        }
        blocks.push(m);
    }
    if let Some((line, _)) = recs.next() {
        return Err(Error::parse(line, "trailing records"));
    }
    let gram = blocks.pop().expect("two blocks");
    let matrix = blocks.pop().expect("two blocks");
    BoundaryOperator::new(tag, dofs, matrix, gram)
}
