//! Up-looking sparse Cholesky factorization `P A P^T = L L^T` with a
//! geometric nested-dissection fill-reducing ordering.
//!
//! The factorization is computed once and then reused for any number of
//! right-hand sides; solves only read the factor, so a factor can be shared
//! between threads.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Below this many vertices a dissection subtree is emitted as-is.
const LEAF_SIZE: usize = 48;

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// Column pointers of L (CSC); the diagonal entry is first in each column.
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl SparseCholesky {
    /// Factors a symmetric positive definite matrix given in full (both
    /// triangles) CSR storage. `coords`, when present, drives the
    /// nested-dissection ordering; otherwise the natural order is used.
    pub fn factor(a: &CsrMatrix, coords: Option<&[[f64; 3]]>) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::Dimension(format!("cholesky of {}x{} matrix", n, a.n_cols())));
        }
        let perm = match coords {
            Some(c) if c.len() == n => nested_dissection(a, c),
            _ => (0..n).collect(),
        };
        let mut pinv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }

        // Upper triangle of the permuted matrix, by columns.
        let mut cp = vec![0usize; n + 1];
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    cp[pj + 1] += 1;
                }
            }
        }
        for k in 0..n {
            cp[k + 1] += cp[k];
        }
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![0.0; cp[n]];
        let mut next = cp.clone();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (pi, pj) = (pinv[i], pinv[j]);
                if pi <= pj {
                    let p = next[pj];
                    ci[p] = pi;
                    cx[p] = v;
                    next[pj] += 1;
                }
            }
        }

        let parent = etree(n, &cp, &ci);

        // Symbolic pass: column counts of L from the row patterns.
        let mut counts = vec![1usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack = Vec::new();
        for k in 0..n {
            ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            for &i in &stack {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];

        // Numeric pass.
        let mut fill = lp.clone();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);
        for k in 0..n {
            ereach(k, &cp, &ci, &parent, &mut mark, &mut stack);
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] += cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..fill[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = fill[i];
                fill[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d });
            }
            let p = fill[k];
            fill[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }

        Ok(SparseCholesky { n, perm, lp, li, lx })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of L.
    pub fn factor_nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.solve_permuted_in_place(&mut x);
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    fn solve_permuted_in_place(&self, x: &mut [f64]) {
        let (lp, li, lx) = (&self.lp, &self.li, &self.lx);
        for j in 0..self.n {
            let xj = x[j] / lx[lp[j]];
            x[j] = xj;
            for p in lp[j] + 1..lp[j + 1] {
                x[li[p]] -= lx[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in lp[j] + 1..lp[j + 1] {
                s -= lx[p] * x[li[p]];
            }
            x[j] = s / lx[lp[j]];
        }
    }
}

/// Elimination tree of the matrix whose upper triangle is given by columns.
fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for p in cp[k]..cp[k + 1] {
            let mut i = ci[p];
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (excluding the diagonal) in topological
/// order, written to `stack`. `mark` uses `k` as the visit stamp.
fn ereach(k: usize, cp: &[usize], ci: &[usize], parent: &[usize], mark: &mut [usize], stack: &mut Vec<usize>) {
    stack.clear();
    mark[k] = k;
    let mut path = Vec::new();
    for p in cp[k]..cp[k + 1] {
        let mut i = ci[p];
        if i >= k {
            continue;
        }
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        // Each path is pushed in reverse so that, after the final reversal,
        // every node precedes its ancestors.
        stack.extend(path.iter().rev());
    }
    stack.reverse();
}

/// Recursive coordinate bisection: each subset is split at the median of its
/// longest extent, vertices of the lower half adjacent to the upper half form
/// the separator, and separators are numbered last.
pub fn nested_dissection(a: &CsrMatrix, coords: &[[f64; 3]]) -> Vec<usize> {
    let n = a.n_rows();
    let mut order = Vec::with_capacity(n);
    let mut side = vec![0u8; n];
    let mut work: Vec<(Vec<usize>, bool)> = vec![((0..n).collect(), false)];
    // Explicit stack of (set, emit) frames; `emit` frames are separators
    // waiting for both halves to be numbered.
    while let Some((set, emit)) = work.pop() {
        if emit || set.len() <= LEAF_SIZE {
            order.extend_from_slice(&set);
            continue;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in &set {
            for d in 0..3 {
                lo[d] = lo[d].min(coords[v][d]);
                hi[d] = hi[d].max(coords[v][d]);
            }
        }
        let axis = (0..3).max_by(|&p, &q| (hi[p] - lo[p]).total_cmp(&(hi[q] - lo[q]))).unwrap();
        let mut sorted = set;
        let mid = sorted.len() / 2;
        sorted.select_nth_unstable_by(mid, |&p, &q| coords[p][axis].total_cmp(&coords[q][axis]).then(p.cmp(&q)));
        let (left, right) = sorted.split_at(mid);
        for &v in left {
            side[v] = 1;
        }
        for &v in right {
            side[v] = 2;
        }
        let mut sep = Vec::new();
        let mut left_rest = Vec::new();
        for &v in left {
            let (cols, _) = a.row(v);
            if cols.iter().any(|&j| side[j] == 2) {
                sep.push(v);
            } else {
                left_rest.push(v);
            }
        }
        let right = right.to_vec();
        for &v in left.iter().chain(&right) {
            side[v] = 0;
        }
        if left_rest.is_empty() || sep.len() * 2 > left.len() + right.len() {
            // Dissection is not making progress; stop here.
            let mut all = left_rest;
            all.extend(sep);
            all.extend(right);
            order.extend_from_slice(&all);
            continue;
        }
        work.push((sep, true));
        work.push((right, false));
        work.push((left_rest, false));
    }
    order
}
