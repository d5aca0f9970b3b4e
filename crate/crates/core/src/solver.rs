//! Symmetric positive definite linear solves: a reusable sparse Cholesky
//! factor for moderate sizes, Jacobi-preconditioned conjugate gradients above.

use serde::{Deserialize, Serialize};

use crate::cholesky::SparseCholesky;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative residual target `|b - A x| / |b|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Direct factorization is used up to this many unknowns in 2D.
    pub direct_max_unknowns_2d: usize,
    /// Same, for 3D meshes where nested-dissection fill grows faster.
    pub direct_max_unknowns_3d: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            max_iter: 20_000,
            direct_max_unknowns_2d: 200_000,
            direct_max_unknowns_3d: 30_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
enum Backend {
    Direct(SparseCholesky),
    Iterative { inv_diag: Vec<f64> },
}

/// A prepared SPD system. Preparing is the expensive step; [`solve`] may be
/// called concurrently from several threads.
///
/// [`solve`]: SpdSolver::solve
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: CsrMatrix,
    backend: Backend,
    config: SolverConfig,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix, coords: Option<&[[f64; 3]]>, dim: usize, config: SolverConfig) -> Result<Self> {
        let n = matrix.n_rows();
        let cap = if dim >= 3 { config.direct_max_unknowns_3d } else { config.direct_max_unknowns_2d };
        let backend = if n <= cap {
            Backend::Direct(SparseCholesky::factor(&matrix, coords)?)
        } else {
            let diag = matrix.diagonal();
            if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: diag[i] });
            }
            Backend::Iterative { inv_diag: diag.iter().map(|d| 1.0 / d).collect() }
        };
        Ok(SpdSolver { matrix, backend, config })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], SolveStats::default()));
        }
        match &self.backend {
            Backend::Direct(f) => {
                let mut x = f.solve(b);
                let mut r = self.residual(b, &x);
                let mut rel = norm(&r) / bnorm;
                // One step of iterative refinement recovers the last digits
                // lost to pivot growth on badly graded meshes.
                if rel > self.config.tol {
                    let dx = f.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                    r = self.residual(b, &x);
                    rel = norm(&r) / bnorm;
                }
                if rel > self.config.tol {
                    return Err(Error::NoConvergence { iterations: 1, residual: rel });
                }
                Ok((x, SolveStats { iterations: 1, relative_residual: rel }))
            }
            Backend::Iterative { inv_diag } => pcg(&self.matrix, inv_diag, b, self.config.tol, self.config.max_iter),
        }
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = self.matrix.mul_vec(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn pcg(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats::default()));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: norm(&r) / bnorm })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
