//! Nested geometric scaffold: the domain Ω with accessible boundary portion
//! Σ, the attachment A glued over Σ₀ ⊂⊂ Σ, the augmented domain Ω̃ = Ω ∪ A,
//! and the nested inclusions D ⊂⊂ D′ ⊂⊂ D̃ ⊂⊂ Ω, meshed as one conforming
//! tagged simplicial mesh.

mod boxed;
mod disk;
pub mod io;
mod params;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

pub use params::{BoxFamily, DiskFamily, Family, GeometryParams};

use crate::error::{Error, Result};
use crate::simplex::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionTag {
    A,
    OmegaMinusDtilde,
    DtildeMinusDprime,
    DprimeMinusD,
    D,
}

impl RegionTag {
    pub const ALL: [RegionTag; 5] =
        [RegionTag::A, RegionTag::OmegaMinusDtilde, RegionTag::DtildeMinusDprime, RegionTag::DprimeMinusD, RegionTag::D];

    pub fn name(self) -> &'static str {
        match self {
            RegionTag::A => "A",
            RegionTag::OmegaMinusDtilde => "OmegaMinusDtilde",
            RegionTag::DtildeMinusDprime => "DtildeMinusDprime",
            RegionTag::DprimeMinusD => "DprimeMinusD",
            RegionTag::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Facet tags. `Sigma` holds the facets of Σ ∖ Σ̄₀ (on ∂Ω̃), `Sigma0` the
/// facets of Σ₀ (interior to Ω̃), `OuterRest` the facets of ∂Ω ∖ Σ and
/// `AttachOuter` the facets of ∂A ∖ Σ₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Sigma,
    Sigma0,
    OuterRest,
    AttachOuter,
    DDtilde,
    DDprime,
    DD,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::Sigma,
        BoundaryTag::Sigma0,
        BoundaryTag::OuterRest,
        BoundaryTag::AttachOuter,
        BoundaryTag::DDtilde,
        BoundaryTag::DDprime,
        BoundaryTag::DD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Sigma => "Sigma",
            BoundaryTag::Sigma0 => "Sigma0",
            BoundaryTag::OuterRest => "OuterRest",
            BoundaryTag::AttachOuter => "AttachOuter",
            BoundaryTag::DDtilde => "dDtilde",
            BoundaryTag::DDprime => "dDprime",
            BoundaryTag::DD => "dD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// The region whose outward normal orients facets with this tag.
    pub fn enclosed_region(self) -> RegionSet {
        match self {
            BoundaryTag::Sigma | BoundaryTag::Sigma0 | BoundaryTag::OuterRest => RegionSet::OMEGA,
            BoundaryTag::AttachOuter => RegionSet::ATTACHMENT,
            BoundaryTag::DDtilde => RegionSet::DTILDE,
            BoundaryTag::DDprime => RegionSet::DPRIME,
            BoundaryTag::DD => RegionSet::D,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A union of region tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionSet(u8);

impl RegionSet {
    pub const OMEGA_TILDE: RegionSet = RegionSet(0b11111);
    pub const ATTACHMENT: RegionSet = RegionSet(0b00001);
    pub const OMEGA: RegionSet = RegionSet(0b11110);
    pub const DTILDE: RegionSet = RegionSet(0b11100);
    pub const DPRIME: RegionSet = RegionSet(0b11000);
    pub const D: RegionSet = RegionSet(0b10000);
    /// Ω̃ ∖ D̄
    pub const OUTSIDE_D: RegionSet = RegionSet(0b01111);
    /// Ω̃ ∖ D̄′
    pub const OUTSIDE_DPRIME: RegionSet = RegionSet(0b00111);

    pub fn of(tags: &[RegionTag]) -> Self {
        RegionSet(tags.iter().fold(0, |m, t| m | t.bit()))
    }

    pub fn contains(self, tag: RegionTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn tags(self) -> impl Iterator<Item = RegionTag> {
        RegionTag::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

/// Scalar metadata carried by a mesh (and its dump).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMeta {
    pub rho0: f64,
    pub m0: f64,
    pub d0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub h1: f64,
    pub mesh_size: f64,
    pub diam_omega: f64,
    /// Centre Q of the ball B_{2ρ₁}(Q) ⊂ A.
    pub q: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedFacet {
    pub verts: [usize; 3],
    pub tag: BoundaryTag,
}

/// A tagged conforming simplicial mesh of Ω̃. Immutable after construction.
#[derive(Debug)]
pub struct MeshedDomain {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    regions: Vec<RegionTag>,
    facets: Vec<TaggedFacet>,
    meta: MeshMeta,
    topology: OnceLock<Topology>,
}

#[derive(Debug)]
struct Topology {
    /// Sorted facet key → adjacent cells (one or two).
    facet_cells: HashMap<[usize; 3], [usize; 2]>,
}

const NONE: usize = usize::MAX;

/// A set of cells, sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet(Vec<usize>);

impl CellSet {
    pub fn from_cells(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        CellSet(cells)
    }

    pub fn cells(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.0.binary_search(&c).is_ok()
    }
}

/// Output of [`MeshedDomain::erode`].
#[derive(Debug, Clone)]
pub struct Erosion {
    pub cells: CellSet,
    /// Number of face-connected components of the eroded set.
    pub components: usize,
}

/// A quadrature point on a tagged boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
    pub facet: usize,
}

/// Vertex-based (trapezoidal) quadrature point on a tagged boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalPoint {
    pub node: usize,
    pub normal: Point,
    pub weight: f64,
}

pub fn build_domain(params: &GeometryParams) -> Result<MeshedDomain> {
    params.validate()?;
    let mesh = match &params.family {
        Family::Disk(d) => disk::build(params, d)?,
        Family::Box(b) => boxed::build(params, b)?,
    };
    mesh.verify(params)?;
    Ok(mesh)
}

impl MeshedDomain {
    /// Assembles a mesh from raw parts, checking indices and cell measures.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<usize>,
        regions: Vec<RegionTag>,
        facets: Vec<TaggedFacet>,
        meta: MeshMeta,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Mesh(format!("unsupported dimension {dim}")));
        }
        let npc = dim + 1;
        if cells.len() != regions.len() * npc {
            return Err(Error::Mesh("cell table and region tags disagree".into()));
        }
        let nv = vertices.len();
        if let Some(&bad) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::Mesh(format!("cell references missing vertex {bad}")));
        }
        for f in &facets {
            if f.verts[..dim].iter().any(|&v| v >= nv) {
                return Err(Error::Mesh("facet references missing vertex".into()));
            }
        }
        if vertices.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::Mesh("non-finite vertex coordinate".into()));
        }
        let mesh = MeshedDomain { dim, vertices, cells, regions, facets, meta, topology: OnceLock::new() };
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell_points(c);
            if simplex::signed_measure(dim, &verts).abs() <= 1e-14 * mesh.meta.mesh_size.powi(dim as i32) {
                return Err(Error::Mesh(format!("cell {c} has zero measure")));
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> &MeshMeta {
        &self.meta
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.regions.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let npc = self.dim + 1;
        &self.cells[c * npc..(c + 1) * npc]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn region(&self, c: usize) -> RegionTag {
        self.regions[c]
    }

    pub fn facets(&self) -> &[TaggedFacet] {
        &self.facets
    }

    pub fn facet_verts(&self, f: usize) -> &[usize] {
        &self.facets[f].verts[..self.dim]
    }

    pub fn barycenter(&self, c: usize) -> Point {
        simplex::barycenter(&self.cell_points(c))
    }

    pub fn cells_in(&self, set: RegionSet) -> CellSet {
        CellSet((0..self.n_cells()).filter(|&c| set.contains(self.regions[c])).collect())
    }

    pub fn region_measure(&self, cells: &CellSet) -> f64 {
        cells.cells().iter().map(|&c| simplex::signed_measure(self.dim, &self.cell_points(c)).abs()).sum()
    }

    /// Vertices touched by the cells, sorted.
    pub fn nodes_of(&self, cells: &CellSet) -> Vec<usize> {
        let mut mark = vec![false; self.n_vertices()];
        for &c in cells.cells() {
            for &v in self.cell(c) {
                mark[v] = true;
            }
        }
        (0..self.n_vertices()).filter(|&v| mark[v]).collect()
    }

    fn topology(&self) -> &Topology {
        self.topology.get_or_init(|| {
            let mut facet_cells: HashMap<[usize; 3], [usize; 2]> = HashMap::with_capacity(self.n_cells() * 2);
            for c in 0..self.n_cells() {
                for key in self.cell_facet_keys(c) {
                    let e = facet_cells.entry(key).or_insert([NONE, NONE]);
                    if e[0] == NONE {
                        e[0] = c;
                    } else {
                        e[1] = c;
                    }
                }
            }
            Topology { facet_cells }
        })
    }

    fn cell_facet_keys(&self, c: usize) -> Vec<[usize; 3]> {
        let verts = self.cell(c);
        (0..verts.len())
            .map(|skip| {
                let mut key = [NONE; 3];
                let mut k = 0;
                for (i, &v) in verts.iter().enumerate() {
                    if i != skip {
                        key[k] = v;
                        k += 1;
                    }
                }
                key[..k].sort_unstable();
                key
            })
            .collect()
    }

    pub(crate) fn facet_key(&self, verts: &[usize]) -> [usize; 3] {
        let mut key = [NONE; 3];
        key[..verts.len()].copy_from_slice(verts);
        key[..verts.len()].sort_unstable();
        key
    }

    /// Cells adjacent to a facet given by its vertices.
    pub fn facet_neighbors(&self, verts: &[usize]) -> Vec<usize> {
        match self.topology().facet_cells.get(&self.facet_key(verts)) {
            Some(cs) => cs.iter().copied().filter(|&c| c != NONE).collect(),
            None => Vec::new(),
        }
    }

    /// Facets of the topological boundary of a cell set, each with the
    /// adjacent cell inside the set.
    pub fn boundary_of(&self, cells: &CellSet) -> Vec<([usize; 3], usize)> {
        let mut inside = vec![false; self.n_cells()];
        for &c in cells.cells() {
            inside[c] = true;
        }
        let mut out = Vec::new();
        for &c in cells.cells() {
            for key in self.cell_facet_keys(c) {
                let nb = self.topology().facet_cells[&key];
                let other = if nb[0] == c { nb[1] } else { nb[0] };
                if other == NONE || !inside[other] {
                    out.push((key, c));
                }
            }
        }
        out
    }

    /// Vertices on the topological boundary of a cell set, sorted.
    pub fn boundary_nodes_of(&self, cells: &CellSet) -> Vec<usize> {
        let mut nodes: Vec<usize> =
            self.boundary_of(cells).iter().flat_map(|(k, _)| k[..self.dim].to_vec()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Number of face-connected components of a cell set.
    pub fn components(&self, cells: &CellSet) -> usize {
        let mut inside = vec![false; self.n_cells()];
        for &c in cells.cells() {
            inside[c] = true;
        }
        let mut seen = vec![false; self.n_cells()];
        let mut count = 0;
        for &start in cells.cells() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                for key in self.cell_facet_keys(c) {
                    for &nb in &self.topology().facet_cells[&key] {
                        if nb != NONE && inside[nb] && !seen[nb] {
                            seen[nb] = true;
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
        count
    }

    /// E_h: cells of `region` whose barycentre lies farther than `h` from the
    /// region's boundary.
    pub fn erode(&self, region: &CellSet, h: f64) -> Result<Erosion> {
        if !(h > 0.0) {
            return Err(Error::Degenerate(format!("erosion depth must be positive, got {h}")));
        }
        let boundary: Vec<Vec<Point>> = self
            .boundary_of(region)
            .iter()
            .map(|(k, _)| k[..self.dim].iter().map(|&v| self.vertices[v]).collect())
            .collect();
        let grid = FacetGrid::new(&boundary, h.max(self.meta.mesh_size));
        let kept: Vec<usize> = region
            .cells()
            .iter()
            .copied()
            .filter(|&c| grid.min_distance_exceeds(&boundary, &self.barycenter(c), h))
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyRegion(format!("erosion by {h} removes every cell")));
        }
        let cells = CellSet(kept);
        let components = self.components(&cells);
        Ok(Erosion { cells, components })
    }

    /// Quadrature points on the facets carrying `tag`: each facet is split
    /// into pieces no longer than `spacing`, one midpoint per piece. Normals
    /// point out of the tag's enclosed region.
    pub fn sample_surface(&self, tag: BoundaryTag, spacing: f64) -> Result<Vec<SurfacePoint>> {
        let ids = self.facets_with(tag);
        if ids.is_empty() {
            return Err(Error::EmptyRegion(format!("no facets tagged {tag}")));
        }
        if !(spacing > 0.0) {
            return Err(Error::Degenerate(format!("sampling spacing must be positive, got {spacing}")));
        }
        let mut out = Vec::new();
        for f in ids {
            let pts: Vec<Point> = self.facet_verts(f).iter().map(|&v| self.vertices[v]).collect();
            let normal = self.oriented_normal(f);
            let measure = simplex::facet_measure(&pts);
            let diam = pts.iter().flat_map(|a| pts.iter().map(move |b| simplex::dist(a, b))).fold(0.0, f64::max);
            let m = ((diam / spacing).ceil() as usize).max(1);
            for p in subdivided_centroids(&pts, m) {
                out.push(SurfacePoint { point: p, normal, weight: measure / (m.pow(self.dim as u32 - 1)) as f64, facet: f });
            }
        }
        Ok(out)
    }

    /// Trapezoidal quadrature on the vertices of the facets carrying `tag`:
    /// each vertex gets an equal share of its facets' measure, and the
    /// weighted average of the adjacent oriented facet normals.
    pub fn nodal_surface_quadrature(&self, tag: BoundaryTag) -> Result<Vec<NodalPoint>> {
        let ids = self.facets_with(tag);
        if ids.is_empty() {
            return Err(Error::EmptyRegion(format!("no facets tagged {tag}")));
        }
        let mut acc: HashMap<usize, (f64, Point)> = HashMap::new();
        for f in ids {
            let verts = self.facet_verts(f);
            let pts: Vec<Point> = verts.iter().map(|&v| self.vertices[v]).collect();
            let share = simplex::facet_measure(&pts) / verts.len() as f64;
            let n = self.oriented_normal(f);
            for &v in verts {
                let e = acc.entry(v).or_insert((0.0, [0.0; 3]));
                e.0 += share;
                for d in 0..3 {
                    e.1[d] += share * n[d];
                }
            }
        }
        let mut out: Vec<NodalPoint> = acc
            .into_iter()
            .map(|(node, (weight, n))| {
                let l = simplex::norm3(&n);
                NodalPoint { node, weight, normal: [n[0] / l, n[1] / l, n[2] / l] }
            })
            .collect();
        out.sort_unstable_by_key(|p| p.node);
        Ok(out)
    }

    pub fn facets_with(&self, tag: BoundaryTag) -> Vec<usize> {
        (0..self.facets.len()).filter(|&f| self.facets[f].tag == tag).collect()
    }

    /// Vertices of the facets carrying any of `tags`, sorted.
    pub fn nodes_on(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| tags.contains(&f.tag))
            .flat_map(|f| f.verts[..self.dim].to_vec())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Unit normal of facet `f`, pointing out of its tag's enclosed region.
    pub fn oriented_normal(&self, f: usize) -> Point {
        let verts = self.facet_verts(f);
        let pts: Vec<Point> = verts.iter().map(|&v| self.vertices[v]).collect();
        let mut n = simplex::facet_normal(&pts);
        let region = self.facets[f].tag.enclosed_region();
        let inside = self.facet_neighbors(verts).into_iter().find(|&c| region.contains(self.regions[c]));
        if let Some(c) = inside {
            let opposite = self.cell(c).iter().find(|v| !verts.contains(v)).copied().unwrap();
            let to_interior = simplex::sub(&self.vertices[opposite], &pts[0]);
            if simplex::dot3(&n, &to_interior) > 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
        }
        n
    }

    /// Nearest vertex to `p` among those accepted by `filter`, with distance.
    pub fn nearest_vertex(&self, p: &Point, filter: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        (0..self.n_vertices())
            .filter(|&v| filter(v))
            .map(|v| (v, simplex::dist(p, &self.vertices[v])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Marks vertices belonging to at least one cell of the set.
    pub fn vertex_mask(&self, cells: &CellSet) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for &c in cells.cells() {
            for &v in self.cell(c) {
                mask[v] = true;
            }
        }
        mask
    }

    /// Checks the structural invariants of a freshly built mesh.
    pub fn verify(&self, params: &GeometryParams) -> Result<()> {
        let h = self.meta.mesh_size;
        for tag in RegionTag::ALL {
            if !self.regions.contains(&tag) {
                return Err(Error::Mesh(format!("region {tag} is empty")));
            }
        }
        for tag in BoundaryTag::ALL {
            if !self.facets.iter().any(|f| f.tag == tag) {
                return Err(Error::Mesh(format!("boundary {tag} is empty")));
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            let nb = self.facet_neighbors(&f.verts[..self.dim]).len();
            let interior = matches!(f.tag, BoundaryTag::Sigma0 | BoundaryTag::DDtilde | BoundaryTag::DDprime | BoundaryTag::DD);
            if interior && nb != 2 {
                return Err(Error::Mesh(format!("interface facet {i} ({}) has {nb} cells", f.tag)));
            }
            if !interior && nb != 1 {
                return Err(Error::Mesh(format!("outer facet {i} ({}) has {nb} cells", f.tag)));
            }
        }
        let all = self.cells_in(RegionSet::OMEGA_TILDE);
        if self.components(&all) != 1 {
            return Err(Error::Mesh("augmented domain is not connected".into()));
        }
        // B_{2ρ₁}(Q) ⊂ A, up to one element layer.
        let q = self.meta.q;
        for c in 0..self.n_cells() {
            if self.regions[c] != RegionTag::A && simplex::dist(&self.barycenter(c), &q) < 2.0 * self.meta.rho1 - h {
                return Err(Error::Mesh(format!("cell {c} inside B(Q, 2 rho1) is not in A")));
            }
        }
        let d_nodes = self.nodes_on(&[BoundaryTag::DD]);
        let omega_bdry = self.nodes_on(&[BoundaryTag::Sigma, BoundaryTag::Sigma0, BoundaryTag::OuterRest]);
        if min_set_distance(&self.vertices, &d_nodes, &omega_bdry) < params.rho0 - h {
            return Err(Error::Mesh("dist(D, boundary of Omega) < rho0".into()));
        }
        let shells = [
            self.nodes_on(&[BoundaryTag::DD]),
            self.nodes_on(&[BoundaryTag::DDprime]),
            self.nodes_on(&[BoundaryTag::DDtilde]),
        ];
        for i in 0..3 {
            for j in i + 1..3 {
                if min_set_distance(&self.vertices, &shells[i], &shells[j]) <= params.rho2 - h {
                    return Err(Error::Mesh("nested boundaries closer than rho2".into()));
                }
            }
        }
        let sigma = self.nodes_on(&[BoundaryTag::Sigma, BoundaryTag::Sigma0]);
        let rest = self.nodes_on(&[BoundaryTag::OuterRest]);
        let best = sigma
            .iter()
            .map(|&p| rest.iter().map(|&r| simplex::dist(&self.vertices[p], &self.vertices[r])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        if best < params.d0 - h {
            return Err(Error::Mesh("no point of Sigma at distance d0 from the rest of the boundary".into()));
        }
        Ok(())
    }
}

fn min_set_distance(pts: &[Point], a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .flat_map(|&i| b.iter().map(move |&j| simplex::dist(&pts[i], &pts[j])))
        .fold(f64::INFINITY, f64::min)
}

/// Centroids of the `m^(k)` pieces of a uniformly subdivided segment or
/// triangle.
fn subdivided_centroids(pts: &[Point], m: usize) -> Vec<Point> {
    let lerp = |a: &Point, b: &Point, t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
    match pts.len() {
        2 => (0..m).map(|i| lerp(&pts[0], &pts[1], (i as f64 + 0.5) / m as f64)).collect(),
        _ => {
            let mf = m as f64;
            let at = |i: f64, j: f64| {
                let (s, t) = (i / mf, j / mf);
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = pts[0][d] + s * (pts[1][d] - pts[0][d]) + t * (pts[2][d] - pts[0][d]);
                }
                p
            };
            let mut out = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m - i {
                    let (i, j) = (i as f64, j as f64);
                    out.push(simplex::barycenter(&[at(i, j), at(i + 1.0, j), at(i, j + 1.0)]));
                    if i + j + 2.0 <= mf {
                        out.push(simplex::barycenter(&[at(i + 1.0, j), at(i + 1.0, j + 1.0), at(i, j + 1.0)]));
                    }
                }
            }
            out
        }
    }
}

/// Uniform bucket grid over facets for bounded-radius distance queries.
struct FacetGrid {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl FacetGrid {
    fn new(facets: &[Vec<Point>], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, f) in facets.iter().enumerate() {
            let mut lo = [i64::MAX; 3];
            let mut hi = [i64::MIN; 3];
            for p in f {
                for d in 0..3 {
                    let k = (p[d] / cell).floor() as i64;
                    lo[d] = lo[d].min(k);
                    hi[d] = hi[d].max(k);
                }
            }
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        buckets.entry([x, y, z]).or_default().push(i);
                    }
                }
            }
        }
        FacetGrid { cell, buckets }
    }

    fn min_distance_exceeds(&self, facets: &[Vec<Point>], p: &Point, h: f64) -> bool {
        let reach = (h / self.cell).ceil() as i64;
        let k = p.map(|x| (x / self.cell).floor() as i64);
        for x in k[0] - reach..=k[0] + reach {
            for y in k[1] - reach..=k[1] + reach {
                for z in k[2] - reach..=k[2] + reach {
                    if let Some(list) = self.buckets.get(&[x, y, z]) {
                        if list.iter().any(|&f| simplex::point_facet_distance(p, &facets[f]) <= h) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Tags the facets of a freshly generated mesh. Outer facets adjacent to A
/// become `AttachOuter`; other outer facets are `Sigma` when `in_sigma`
/// accepts their centroid and `OuterRest` otherwise. Interfaces are tagged
/// from the pair of regions they separate.
pub(crate) fn tag_facets(
    dim: usize,
    vertices: &[Point],
    cells: &[usize],
    regions: &[RegionTag],
    in_sigma: impl Fn(&Point) -> bool,
) -> Vec<TaggedFacet> {
    let npc = dim + 1;
    let mut map: HashMap<[usize; 3], [usize; 2]> = HashMap::new();
    for c in 0..regions.len() {
        let verts = &cells[c * npc..(c + 1) * npc];
        for skip in 0..npc {
            let mut key = [NONE; 3];
            let mut k = 0;
            for (i, &v) in verts.iter().enumerate() {
                if i != skip {
                    key[k] = v;
                    k += 1;
                }
            }
            key[..k].sort_unstable();
            let e = map.entry(key).or_insert([NONE, NONE]);
            if e[0] == NONE {
                e[0] = c;
            } else {
                e[1] = c;
            }
        }
    }
    use RegionTag::*;
    let mut out: Vec<TaggedFacet> = map
        .into_iter()
        .filter_map(|(key, [c0, c1])| {
            let tag = if c1 == NONE {
                if regions[c0] == A {
                    BoundaryTag::AttachOuter
                } else {
                    let pts: Vec<Point> = key[..dim].iter().map(|&v| vertices[v]).collect();
                    if in_sigma(&simplex::barycenter(&pts)) {
                        BoundaryTag::Sigma
                    } else {
                        BoundaryTag::OuterRest
                    }
                }
            } else {
                let (r0, r1) = (regions[c0].min(regions[c1]), regions[c0].max(regions[c1]));
                match (r0, r1) {
                    (A, OmegaMinusDtilde) => BoundaryTag::Sigma0,
                    (OmegaMinusDtilde, DtildeMinusDprime) => BoundaryTag::DDtilde,
                    (DtildeMinusDprime, DprimeMinusD) => BoundaryTag::DDprime,
                    (DprimeMinusD, D) => BoundaryTag::DD,
                    _ => return None,
                }
            };
            Some(TaggedFacet { verts: key, tag })
        })
        .collect();
    out.sort_unstable_by_key(|f| (f.tag, f.verts));
    out
}

#[cfg(test)]
mod tests;
