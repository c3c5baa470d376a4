//! Exact nullspaces and span comparisons over ℚ(√2).
//!
//! `nullspace` first removes singleton rows (`x_p = 0`) and doubleton rows
//! (`x_p = λ x_q`) with a weighted union-find, then runs sparse Gaussian
//! elimination column by column on what is left. Pivots are chosen per column
//! by smallest |field norm| of the leading entry, then fewest nonzeros, then
//! row order, so results are reproducible.

use std::cmp::Ordering;

use thiserror::Error;

use crate::exact_ring::{QSqrt2, Rational};
use crate::symmetry::{normalize_row, ConstraintSystem, SparseRow};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("ambient dimension mismatch: {0} vs {1}")]
    ColumnMismatch(usize, usize),
    #[error("basis vector {vector} violates constraint row {row}")]
    Residual { row: usize, vector: usize },
}

/// A list of linearly independent vectors in `QSqrt2^ncols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub vectors: Vec<Vec<QSqrt2>>,
    pub ncols: usize,
}

impl Basis {
    pub fn new(ncols: usize, vectors: Vec<Vec<QSqrt2>>) -> Self {
        debug_assert!(vectors.iter().all(|v| v.len() == ncols));
        Basis { vectors, ncols }
    }

    pub fn empty(ncols: usize) -> Self {
        Basis { vectors: Vec::new(), ncols }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn sub_scaled(a: &[(usize, QSqrt2)], f: &QSqrt2, b: &[(usize, QSqrt2)]) -> SparseRow {
    // a − f·b, both sorted
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match take {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push((b[j].0, -(f * &b[j].1)));
                j += 1;
            }
            Ordering::Equal => {
                let v = &a[i].1 - &(f * &b[j].1);
                if !v.is_zero() {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn abs_norm(v: &QSqrt2) -> Rational {
    v.norm().abs()
}

/// Row-echelon form: `pivots[c]` is the normalised row leading at column `c`.
fn echelon(ncols: usize, rows: Vec<SparseRow>) -> Vec<Option<SparseRow>> {
    let mut buckets: Vec<Vec<(usize, SparseRow)>> = vec![Vec::new(); ncols];
    for (id, r) in rows.into_iter().enumerate() {
        if let Some(&(c, _)) = r.first() {
            buckets[c].push((id, r));
        }
    }
    let mut pivots: Vec<Option<SparseRow>> = vec![None; ncols];
    for c in 0..ncols {
        let mut cands = std::mem::take(&mut buckets[c]);
        if cands.is_empty() {
            continue;
        }
        let best = (0..cands.len())
            .min_by(|&x, &y| {
                let (ix, rx) = &cands[x];
                let (iy, ry) = &cands[y];
                abs_norm(&rx[0].1)
                    .cmp(&abs_norm(&ry[0].1))
                    .then(rx.len().cmp(&ry.len()))
                    .then(ix.cmp(iy))
            })
            .unwrap();
        let (_, prow) = cands.swap_remove(best);
        let inv = prow[0].1.inv().expect("leading entries are nonzero");
        let pivot: SparseRow = prow.into_iter().map(|(k, v)| (k, &v * &inv)).collect();
        for (id, r) in cands {
            let reduced = sub_scaled(&r, &r[0].1, &pivot);
            if let Some(&(lead, _)) = reduced.first() {
                debug_assert!(lead > c);
                buckets[lead].push((id, reduced));
            }
        }
        pivots[c] = Some(pivot);
    }
    pivots
}

/// Weighted union-find: `x_p = factor[p] · x_parent[p]`.
struct Links {
    parent: Vec<usize>,
    factor: Vec<QSqrt2>,
    killed: Vec<bool>,
}

impl Links {
    fn new(n: usize) -> Self {
        Links { parent: (0..n).collect(), factor: vec![QSqrt2::ONE; n], killed: vec![false; n] }
    }

    /// `(root, f)` with `x_p = f · x_root`.
    fn find(&mut self, p: usize) -> (usize, QSqrt2) {
        let mut path = Vec::new();
        let mut cur = p;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // Compress from the node closest to the root outward.
        for &node in path.iter().rev() {
            let par = self.parent[node];
            if par != root {
                self.factor[node] = &self.factor[node] * &self.factor[par];
                self.parent[node] = root;
            }
        }
        (root, if p == root { QSqrt2::ONE } else { self.factor[p].clone() })
    }

    fn rewrite(&mut self, row: &[(usize, QSqrt2)]) -> SparseRow {
        let mut out = Vec::with_capacity(row.len());
        for (c, v) in row {
            let (r, f) = self.find(*c);
            if !self.killed[r] {
                out.push((r, v * &f));
            }
        }
        normalize_row(out)
    }
}

/// Basis of `{t : row · t = 0 for every row}`, ordered by free column.
pub fn nullspace(sys: &ConstraintSystem) -> Basis {
    let n = sys.ncols;
    let mut links = Links::new(n);
    let mut rows: Vec<SparseRow> = sys.rows.clone();
    loop {
        let mut changed = false;
        let mut kept = Vec::with_capacity(rows.len());
        for row in &rows {
            let r = links.rewrite(row);
            match r.len() {
                0 => {}
                1 => {
                    links.killed[r[0].0] = true;
                    changed = true;
                }
                2 => {
                    // a x_p + b x_q = 0 with p < q: x_p = −(b/a) x_q
                    let (p, a) = &r[0];
                    let (q, b) = &r[1];
                    links.parent[*p] = *q;
                    links.factor[*p] = -(b * &a.inv().expect("nonzero"));
                    changed = true;
                }
                _ => kept.push(r),
            }
        }
        rows = kept;
        if !changed {
            break;
        }
    }

    // Compact the surviving root columns, keeping their order.
    let mut compact = vec![usize::MAX; n];
    let mut live = Vec::new();
    for c in 0..n {
        if links.parent[c] == c && !links.killed[c] {
            compact[c] = live.len();
            live.push(c);
        }
    }
    let rows: Vec<SparseRow> =
        rows.into_iter().map(|r| r.into_iter().map(|(c, v)| (compact[c], v)).collect()).collect();
    let pivots = echelon(live.len(), rows);

    let free: Vec<usize> = (0..live.len()).filter(|&c| pivots[c].is_none()).collect();
    let mut free_slot = vec![usize::MAX; live.len()];
    for (k, &c) in free.iter().enumerate() {
        free_slot[c] = k;
    }
    // expr[c]: x_c as a sparse combination of the free variables.
    let mut expr: Vec<Vec<(usize, QSqrt2)>> = vec![Vec::new(); live.len()];
    for c in (0..live.len()).rev() {
        match &pivots[c] {
            None => expr[c] = vec![(free_slot[c], QSqrt2::ONE)],
            Some(p) => {
                let mut acc: Vec<(usize, QSqrt2)> = Vec::new();
                for (k, v) in &p[1..] {
                    for (f, w) in &expr[*k] {
                        acc.push((*f, -(v * w)));
                    }
                }
                expr[c] = normalize_row(acc);
            }
        }
    }

    let mut vectors = vec![vec![QSqrt2::ZERO; n]; free.len()];
    for (ci, &col) in live.iter().enumerate() {
        for (f, w) in &expr[ci] {
            vectors[*f][col] = w.clone();
        }
    }
    for p in 0..n {
        let (r, fac) = links.find(p);
        if r == p || links.killed[r] {
            continue;
        }
        for v in vectors.iter_mut() {
            if !v[r].is_zero() {
                v[p] = &fac * &v[r];
            }
        }
    }
    Basis { vectors, ncols: n }
}

fn dense_to_sparse(v: &[QSqrt2]) -> SparseRow {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(c, x)| (c, x.clone())).collect()
}

/// Rank of a set of dense vectors.
pub fn rank(vectors: &[Vec<QSqrt2>], ncols: usize) -> usize {
    let rows = vectors.iter().map(|v| dense_to_sparse(v)).filter(|r| !r.is_empty()).collect();
    echelon(ncols, rows).iter().filter(|p| p.is_some()).count()
}

/// Rank of the constraint matrix.
pub fn system_rank(sys: &ConstraintSystem) -> usize {
    sys.ncols - nullspace(sys).dim()
}

/// `span(a) = span(b)`, decided by `rank(a) = rank(b) = rank(a ∪ b)`.
pub fn subspace_equal(a: &Basis, b: &Basis) -> bool {
    if a.ncols != b.ncols {
        return false;
    }
    let ra = rank(&a.vectors, a.ncols);
    let rb = rank(&b.vectors, b.ncols);
    if ra != rb {
        return false;
    }
    let both: Vec<Vec<QSqrt2>> = a.vectors.iter().chain(&b.vectors).cloned().collect();
    rank(&both, a.ncols) == ra
}

/// Every row annihilates every vector, exactly.
pub fn verify_basis(sys: &ConstraintSystem, basis: &Basis) -> Result<(), SolverError> {
    if sys.ncols != basis.ncols {
        return Err(SolverError::ColumnMismatch(sys.ncols, basis.ncols));
    }
    for (vi, v) in basis.vectors.iter().enumerate() {
        for r in 0..sys.rows.len() {
            if !sys.row_dot(r, v).is_zero() {
                return Err(SolverError::Residual { row: r, vector: vi });
            }
        }
    }
    Ok(())
}

/// Coefficients `c` with `Σ c_i span_i = target`, if the target lies in the span.
/// The span vectors need not be independent; the returned combination is one solution.
pub fn express_in_span(target: &[QSqrt2], span: &[Vec<QSqrt2>]) -> Option<Vec<QSqrt2>> {
    let k = span.len();
    let mut sys = ConstraintSystem::new(k + 1);
    for p in 0..target.len() {
        let mut row: Vec<(usize, QSqrt2)> =
            span.iter().enumerate().filter(|(_, v)| !v[p].is_zero()).map(|(i, v)| (i, v[p].clone())).collect();
        if !target[p].is_zero() {
            row.push((k, target[p].clone()));
        }
        if !row.is_empty() {
            sys.push(row, crate::symmetry::RowTag::PairSym);
        }
    }
    let ns = nullspace(&sys);
    let v = ns.vectors.iter().find(|v| !v[k].is_zero())?;
    let scale = -(v[k].inv().ok()?);
    Some(v[..k].iter().map(|x| x * &scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::RowTag;

    fn q(v: i64) -> QSqrt2 {
        QSqrt2::from_integer(v)
    }

    fn system(ncols: usize, rows: &[&[(usize, i64)]]) -> ConstraintSystem {
        let mut sys = ConstraintSystem::new(ncols);
        for r in rows {
            sys.push(r.iter().map(|(c, v)| (*c, q(*v))).collect(), RowTag::PairSym);
        }
        sys
    }

    #[test]
    fn identity_rows_leave_nothing() {
        let sys = system(3, &[&[(0, 1)], &[(1, 1)], &[(2, 1)]]);
        assert_eq!(nullspace(&sys).dim(), 0);
    }

    #[test]
    fn no_rows_give_full_space() {
        let b = nullspace(&ConstraintSystem::new(3));
        assert_eq!(b.dim(), 3);
        assert!(subspace_equal(
            &b,
            &Basis::new(3, vec![vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]])
        ));
    }

    #[test]
    fn single_row_kernel() {
        let sys = system(2, &[&[(0, 1), (1, -2)]]);
        let b = nullspace(&sys);
        assert_eq!(b.dim(), 1);
        assert!(subspace_equal(&b, &Basis::new(2, vec![vec![q(2), q(1)]])));
        verify_basis(&sys, &b).unwrap();
    }

    #[test]
    fn dense_elimination_path() {
        // x0 + x1 + x2 + x3 = 0, x0 − x1 + 2x2 = 0, x1 + √2 x3 − x2 = 0
        let mut sys = system(4, &[&[(0, 1), (1, 1), (2, 1), (3, 1)], &[(0, 1), (1, -1), (2, 2)]]);
        sys.push(vec![(1, q(1)), (2, q(-1)), (3, QSqrt2::SQRT2)], RowTag::PairSym);
        let b = nullspace(&sys);
        assert_eq!(b.dim(), 1);
        verify_basis(&sys, &b).unwrap();
    }

    #[test]
    fn doubleton_cycles_can_kill() {
        // x0 = x1, x1 = x2, x2 = −x0 forces all zero; x3 free.
        let sys = system(4, &[&[(0, 1), (1, -1)], &[(1, 1), (2, -1)], &[(0, 1), (2, 1)]]);
        let b = nullspace(&sys);
        assert_eq!(b.dim(), 1);
        assert_eq!(b.vectors[0], vec![q(0), q(0), q(0), q(1)]);
    }

    #[test]
    fn span_checks() {
        let v = vec![q(1), q(2), q(0)];
        let a = Basis::new(3, vec![v.clone()]);
        let b = Basis::new(3, vec![v.iter().map(|x| x * &q(7)).collect()]);
        assert!(subspace_equal(&a, &b));
        let e1 = Basis::new(3, vec![vec![q(1), q(0), q(0)]]);
        let e2 = Basis::new(3, vec![vec![q(0), q(1), q(0)]]);
        assert!(!subspace_equal(&e1, &e2));
        let c = express_in_span(&[q(2), q(3), q(0)], &[e1.vectors[0].clone(), e2.vectors[0].clone()]).unwrap();
        assert_eq!(c, vec![q(2), q(3)]);
        assert!(express_in_span(&[q(0), q(0), q(1)], &[e1.vectors[0].clone()]).is_none());
    }

    #[test]
    fn deterministic() {
        let sys = system(5, &[&[(0, 1), (2, 3), (4, -1)], &[(1, 2), (3, 1)], &[(0, 1), (1, 1), (4, 1)]]);
        assert_eq!(nullspace(&sys), nullspace(&sys));
    }
}
