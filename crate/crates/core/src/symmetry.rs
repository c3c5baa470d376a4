//! Coefficient-tensor shapes with index symmetries, the discrete Lorentz
//! generators, and every family of linear constraints the classification uses.
//!
//! Columns of a [`ConstraintSystem`] are flat row-major offsets of the full
//! `n^r` tensor. Each symmetry orbit of index tuples has one canonical
//! representative, the member with the largest flat offset; rows other than
//! the `pair-sym` family only reference canonical columns.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::exact_ring::{QSqrt2, Rational};
use crate::tensor::{flatten, multi_indices, unflatten};

/// Generators of the index-permutation symmetries of a coefficient tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Swap two index positions.
    Swap(usize, usize),
    /// Swap the blocks `[first, first + len)` and `[second, second + len)`.
    BlockSwap { first: usize, second: usize, len: usize },
}

impl Symmetry {
    fn apply(&self, idx: &mut [usize]) {
        match *self {
            Symmetry::Swap(a, b) => idx.swap(a, b),
            Symmetry::BlockSwap { first, second, len } => {
                for k in 0..len {
                    idx.swap(first + k, second + k);
                }
            }
        }
    }
}

/// Dimension, rank and declared symmetries of a coefficient tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    pub dim: usize,
    pub rank: usize,
    pub syms: Vec<Symmetry>,
}

impl TensorShape {
    pub fn new(dim: usize, rank: usize, syms: Vec<Symmetry>) -> Self {
        TensorShape { dim, rank, syms }
    }

    /// No declared symmetries.
    pub fn plain(dim: usize, rank: usize) -> Self {
        Self::new(dim, rank, Vec::new())
    }

    /// `a^{ijkl}`: symmetric in `(ij)` and `(kl)`.
    pub fn weyl4(dim: usize) -> Self {
        Self::new(dim, 4, vec![Symmetry::Swap(0, 1), Symmetry::Swap(2, 3)])
    }

    /// `a^{ijklmp}`: symmetric in `(ij)`, `(kl)`, `(mp)`.
    pub fn einstein6(dim: usize) -> Self {
        Self::new(dim, 6, vec![Symmetry::Swap(0, 1), Symmetry::Swap(2, 3), Symmetry::Swap(4, 5)])
    }

    /// `b^{ij} = b^{ji}`.
    pub fn symmetric2(dim: usize) -> Self {
        Self::new(dim, 2, vec![Symmetry::Swap(0, 1)])
    }

    /// `γ^{ijklqrst}`: the four pair symmetries plus `(ijkl) ↔ (qrst)`.
    pub fn gamma8(dim: usize) -> Self {
        Self::new(
            dim,
            8,
            vec![
                Symmetry::Swap(0, 1),
                Symmetry::Swap(2, 3),
                Symmetry::Swap(4, 5),
                Symmetry::Swap(6, 7),
                Symmetry::BlockSwap { first: 0, second: 4, len: 4 },
            ],
        )
    }

    /// `η^{IjKl}` with `η^{IjKl} = η^{KlIj}`, rank `2(m+1)`.
    pub fn matter_eta(dim: usize, m: usize) -> Self {
        Self::new(dim, 2 * (m + 1), vec![Symmetry::BlockSwap { first: 0, second: m + 1, len: m + 1 }])
    }

    /// `β^{Ijlmpq}`, rank `m + 5`, symmetric in `(lm)` and `(pq)`.
    pub fn mixed_second_deriv(dim: usize, m: usize) -> Self {
        Self::new(dim, m + 5, vec![Symmetry::Swap(m + 1, m + 2), Symmetry::Swap(m + 3, m + 4)])
    }

    /// `μ^{IJ} = μ^{JI}`, rank `2m`.
    pub fn quadratic_in_d(dim: usize, m: usize) -> Self {
        Self::new(dim, 2 * m, vec![Symmetry::BlockSwap { first: 0, second: m, len: m }])
    }

    pub fn ncols(&self) -> usize {
        self.dim.pow(self.rank as u32)
    }

    /// All index tuples reachable from `idx` under the declared symmetries.
    pub fn orbit(&self, idx: &[usize]) -> Vec<Vec<usize>> {
        let mut seen: Vec<Vec<usize>> = vec![idx.to_vec()];
        let mut frontier = 0;
        while frontier < seen.len() {
            let cur = seen[frontier].clone();
            frontier += 1;
            for s in &self.syms {
                let mut next = cur.clone();
                s.apply(&mut next);
                if !seen.contains(&next) {
                    seen.push(next);
                }
            }
        }
        seen
    }

    /// Flat offset of the canonical (largest) member of the orbit of `idx`.
    pub fn canonical_flat(&self, idx: &[usize]) -> usize {
        self.orbit(idx).iter().map(|t| flatten(self.dim, t)).max().unwrap_or(0)
    }

    /// `canon[f]` for every flat offset `f`.
    pub fn canonical_map(&self) -> Vec<usize> {
        let total = self.ncols();
        // Union-find in which the root of every class is its largest member.
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut idx = vec![0usize; self.rank];
        for f in 0..total {
            for s in &self.syms {
                let mut rest = f;
                for slot in idx.iter_mut().rev() {
                    *slot = rest % self.dim;
                    rest /= self.dim;
                }
                s.apply(&mut idx);
                let g = flatten(self.dim, &idx);
                let (a, b) = (find(&mut parent, f), find(&mut parent, g));
                if a != b {
                    parent[a.min(b)] = a.max(b);
                }
            }
        }
        (0..total).map(|f| find(&mut parent, f)).collect()
    }

    /// Canonical flat offsets in increasing order.
    pub fn canonical_columns(&self) -> Vec<usize> {
        self.canonical_map().into_iter().enumerate().filter(|(f, c)| f == c).map(|(f, _)| f).collect()
    }
}

/// A coefficient tensor over ℚ(√2) with its declared shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    pub shape: TensorShape,
    pub entries: Vec<QSqrt2>,
}

impl CoefficientTensor {
    pub fn zeros(shape: TensorShape) -> Self {
        let entries = vec![QSqrt2::ZERO; shape.ncols()];
        CoefficientTensor { shape, entries }
    }

    pub fn from_entries(shape: TensorShape, entries: Vec<QSqrt2>) -> Option<Self> {
        (entries.len() == shape.ncols()).then_some(CoefficientTensor { shape, entries })
    }

    pub fn get(&self, idx: &[usize]) -> &QSqrt2 {
        &self.entries[flatten(self.shape.dim, idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: QSqrt2) {
        let f = flatten(self.shape.dim, idx);
        self.entries[f] = v;
    }

    pub fn add_at(&mut self, idx: &[usize], v: &QSqrt2) {
        let f = flatten(self.shape.dim, idx);
        self.entries[f] += v;
    }

    /// Orbit average under the declared symmetries.
    pub fn symmetrized(&self) -> CoefficientTensor {
        let shape = self.shape.clone();
        let mut out = CoefficientTensor::zeros(shape.clone());
        for idx in multi_indices(shape.dim, shape.rank) {
            let v = self.get(&idx);
            if v.is_zero() {
                continue;
            }
            let orbit = shape.orbit(&idx);
            let w = v.scale(&Rational::new(1, orbit.len() as i64).unwrap());
            for t in orbit {
                out.add_at(&t, &w);
            }
        }
        out
    }

    /// True iff every entry equals its orbit mates.
    pub fn respects_symmetries(&self) -> bool {
        multi_indices(self.shape.dim, self.shape.rank)
            .all(|idx| self.shape.orbit(&idx).iter().all(|t| self.get(t) == self.get(&idx)))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(QSqrt2::is_zero)
    }
}

/// Which discrete Lorentz transformation a generator is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GeneratorKind {
    /// `e_m ↦ −e_m`
    SignFlip(usize),
    /// Swap of two spatial axes.
    Transposition(usize, usize),
    /// The √2 boost in the `(0, 1)` plane.
    Boost,
}

/// `matrix[i][j] = A^i_j` over ℚ(√2).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGenerator {
    pub matrix: Vec<Vec<QSqrt2>>,
    pub kind: GeneratorKind,
}

impl GroupGenerator {
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    /// `Aᵀ η A = η`, checked exactly.
    pub fn is_eta_orthogonal(&self) -> bool {
        let n = self.dim();
        let eps = |i: usize| if i == 0 { QSqrt2::from_integer(-1) } else { QSqrt2::ONE };
        for a in 0..n {
            for b in 0..n {
                let mut s = QSqrt2::ZERO;
                for i in 0..n {
                    s += &(&(&self.matrix[i][a] * &self.matrix[i][b]) * &eps(i));
                }
                let expected = if a == b { eps(a) } else { QSqrt2::ZERO };
                if s != expected {
                    return false;
                }
            }
        }
        true
    }

    /// `η A^T η`, the inverse of an η-orthogonal matrix.
    pub fn inverse(&self) -> GroupGenerator {
        let n = self.dim();
        let eps = |i: usize| if i == 0 { -1 } else { 1 };
        let matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.matrix[j][i].scale(&Rational::from_integer(eps(i) * eps(j))))
                    .collect()
            })
            .collect();
        GroupGenerator { matrix, kind: self.kind }
    }
}

fn identity(n: usize) -> Vec<Vec<QSqrt2>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { QSqrt2::ONE } else { QSqrt2::ZERO }).collect()).collect()
}

/// Sign flips of every axis, adjacent spatial transpositions, and the √2 boost.
pub fn generators(n: usize) -> Vec<GroupGenerator> {
    let mut out = Vec::new();
    for m in 0..n {
        let mut a = identity(n);
        a[m][m] = QSqrt2::from_integer(-1);
        out.push(GroupGenerator { matrix: a, kind: GeneratorKind::SignFlip(m) });
    }
    for i in 1..n.saturating_sub(1) {
        let mut a = identity(n);
        a[i][i] = QSqrt2::ZERO;
        a[i + 1][i + 1] = QSqrt2::ZERO;
        a[i][i + 1] = QSqrt2::ONE;
        a[i + 1][i] = QSqrt2::ONE;
        out.push(GroupGenerator { matrix: a, kind: GeneratorKind::Transposition(i, i + 1) });
    }
    if n >= 2 {
        let mut a = identity(n);
        a[0][0] = QSqrt2::SQRT2;
        a[1][1] = QSqrt2::SQRT2;
        a[0][1] = QSqrt2::ONE;
        a[1][0] = QSqrt2::ONE;
        out.push(GroupGenerator { matrix: a, kind: GeneratorKind::Boost });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum QuadraticFamily {
    /// Pure third-derivative choice: `γ^{Pqrst} + γ^{Pqstr} + γ^{Pqtrs} = 0`.
    C,
    /// Second-derivative choice with a single symmetric pair (four-term sums).
    BDiagonal,
    /// Second-derivative choice with two distinct pairs.
    BMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MixingFamily {
    /// `deg_t(Q) η^{IjQt} = 0`
    Diagonal,
    /// `Σ_{q_r = t} (η^{IjQs} + η^{Ij Q[r←s] t}) = 0`
    OffDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GroupFamily {
    SignFlip,
    Transposition,
    Boost,
}

impl From<GeneratorKind> for GroupFamily {
    fn from(k: GeneratorKind) -> Self {
        match k {
            GeneratorKind::SignFlip(_) => GroupFamily::SignFlip,
            GeneratorKind::Transposition(..) => GroupFamily::Transposition,
            GeneratorKind::Boost => GroupFamily::Boost,
        }
    }
}

/// Provenance of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RowTag {
    PairSym,
    CubicChange,
    QuadraticChange(QuadraticFamily),
    Group(GroupFamily),
    MatterMixing(MixingFamily),
    Parity,
}

impl RowTag {
    /// Coarse family name: `pair-sym`, `cubic-change`, `quadratic-change`,
    /// `group:<kind>`, `matter-mixing` or `parity`.
    pub fn family(&self) -> &'static str {
        match self {
            RowTag::PairSym => "pair-sym",
            RowTag::CubicChange => "cubic-change",
            RowTag::QuadraticChange(_) => "quadratic-change",
            RowTag::Group(GroupFamily::SignFlip) => "group:sign-flip",
            RowTag::Group(GroupFamily::Transposition) => "group:transposition",
            RowTag::Group(GroupFamily::Boost) => "group:boost",
            RowTag::MatterMixing(_) => "matter-mixing",
            RowTag::Parity => "parity",
        }
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::QuadraticChange(QuadraticFamily::C) => write!(f, "quadratic-change:c"),
            RowTag::QuadraticChange(QuadraticFamily::BDiagonal) => write!(f, "quadratic-change:b-diagonal"),
            RowTag::QuadraticChange(QuadraticFamily::BMixed) => write!(f, "quadratic-change:b-mixed"),
            RowTag::MatterMixing(MixingFamily::Diagonal) => write!(f, "matter-mixing:diagonal"),
            RowTag::MatterMixing(MixingFamily::OffDiagonal) => write!(f, "matter-mixing:off-diagonal"),
            other => f.write_str(other.family()),
        }
    }
}

/// A sparse row: strictly increasing columns, no zero coefficients.
pub type SparseRow = Vec<(usize, QSqrt2)>;

/// Two row families produced together.
type RowPair = (Vec<SparseRow>, Vec<SparseRow>);

/// Sorts, merges duplicate columns and drops zeros.
pub fn normalize_row(mut entries: Vec<(usize, QSqrt2)>) -> SparseRow {
    entries.sort_by_key(|e| e.0);
    let mut out: SparseRow = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += &v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|(_, v)| !v.is_zero());
    out
}

/// Sparse homogeneous linear constraints on a flattened coefficient tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSystem {
    pub ncols: usize,
    pub rows: Vec<SparseRow>,
    pub tags: Vec<RowTag>,
}

impl ConstraintSystem {
    pub fn new(ncols: usize) -> Self {
        ConstraintSystem { ncols, rows: Vec::new(), tags: Vec::new() }
    }

    /// Adds a row after normalisation; zero rows are dropped.
    pub fn push(&mut self, entries: Vec<(usize, QSqrt2)>, tag: RowTag) {
        let row = normalize_row(entries);
        if row.is_empty() {
            return;
        }
        debug_assert!(row.last().unwrap().0 < self.ncols);
        self.rows.push(row);
        self.tags.push(tag);
    }

    pub fn extend(&mut self, other: ConstraintSystem) {
        assert_eq!(self.ncols, other.ncols, "column count mismatch");
        self.rows.extend(other.rows);
        self.tags.extend(other.tags);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct coarse family names, sorted.
    pub fn families(&self) -> Vec<String> {
        let mut f: Vec<String> = self.tags.iter().map(|t| t.family().to_string()).collect();
        f.sort();
        f.dedup();
        f
    }

    /// Distinct detailed tags, sorted.
    pub fn labels(&self) -> Vec<String> {
        let mut t: Vec<RowTag> = self.tags.clone();
        t.sort();
        t.dedup();
        t.into_iter().map(|t| t.to_string()).collect()
    }

    pub fn has_tag(&self, tag: RowTag) -> bool {
        self.tags.contains(&tag)
    }

    /// Exact dot product of row `r` with a dense vector.
    pub fn row_dot(&self, r: usize, v: &[QSqrt2]) -> QSqrt2 {
        let mut s = QSqrt2::ZERO;
        for (c, a) in &self.rows[r] {
            if !v[*c].is_zero() {
                s += &(a * &v[*c]);
            }
        }
        s
    }

    fn from_rows(ncols: usize, rows: impl IntoIterator<Item = (SparseRow, RowTag)>) -> Self {
        let mut sys = ConstraintSystem::new(ncols);
        for (row, tag) in rows {
            if !row.is_empty() {
                sys.rows.push(row);
                sys.tags.push(tag);
            }
        }
        sys
    }
}

/// Canonicalises a raw row's columns and removes duplicate rows (keeping first occurrences).
fn canonical_rows(canon: &[usize], raw: Vec<Vec<(usize, QSqrt2)>>, tag: RowTag, seen: &mut HashSet<SparseRow>) -> Vec<(SparseRow, RowTag)> {
    let mut out = Vec::new();
    for r in raw {
        let row = normalize_row(r.into_iter().map(|(c, v)| (canon[c], v)).collect());
        if row.is_empty() {
            continue;
        }
        let neg: SparseRow = row.iter().map(|(c, v)| (*c, -v)).collect();
        if seen.contains(&row) || seen.contains(&neg) {
            continue;
        }
        seen.insert(row.clone());
        out.push((row, tag));
    }
    out
}

/// `x_t − x_canon(t)` for every non-canonical column `t`.
pub fn gen_pair_sym(shape: &TensorShape) -> ConstraintSystem {
    let canon = shape.canonical_map();
    let mut sys = ConstraintSystem::new(shape.ncols());
    for (t, &c) in canon.iter().enumerate() {
        if t != c {
            sys.rows.push(vec![(t, QSqrt2::ONE), (c, QSqrt2::from_integer(-1))]);
            sys.tags.push(RowTag::PairSym);
        }
    }
    sys
}

/// `(A^{⊗r} t)^I − t^I = 0` for every canonical output tuple `I`.
pub fn gen_group_constraints(shape: &TensorShape, a: &GroupGenerator) -> ConstraintSystem {
    let n = shape.dim;
    assert_eq!(a.dim(), n, "generator dimension mismatch");
    let canon = shape.canonical_map();
    let nonzero: Vec<Vec<(usize, QSqrt2)>> = a
        .matrix
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(j, v)| (j, v.clone())).collect())
        .collect();
    let outputs: Vec<usize> = canon.iter().enumerate().filter(|(f, c)| f == *c).map(|(f, _)| f).collect();
    let rank = shape.rank;
    let tag = RowTag::Group(a.kind.into());
    let rows: Vec<(SparseRow, RowTag)> = outputs
        .par_iter()
        .map(|&out_flat| {
            let idx = unflatten(n, rank, out_flat);
            let mut entries: Vec<(usize, QSqrt2)> = vec![(out_flat, QSqrt2::from_integer(-1))];
            // Expand Π_k A[i_k][j_k] over the nonzero pattern of each row.
            let mut partial: Vec<(usize, QSqrt2)> = vec![(0, QSqrt2::ONE)];
            for &i in &idx {
                let mut next = Vec::with_capacity(partial.len() * nonzero[i].len());
                for (f, w) in &partial {
                    for (j, a) in &nonzero[i] {
                        next.push((f * n + j, w * a));
                    }
                }
                partial = next;
            }
            entries.extend(partial.into_iter().map(|(f, w)| (canon[f], w)));
            (normalize_row(entries), tag)
        })
        .collect();
    ConstraintSystem::from_rows(shape.ncols(), rows)
}

/// All generators for a shape, concatenated in generator order.
pub fn gen_all_group_constraints(shape: &TensorShape) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new(shape.ncols());
    for g in generators(shape.dim) {
        sys.extend(gen_group_constraints(shape, &g));
    }
    sys
}

/// Positions of the tensor outside `[start, start + 4)`.
fn outside(rank: usize, start: usize) -> Vec<usize> {
    (0..rank).filter(|p| *p < start || *p >= start + 4).collect()
}

fn assemble(rank: usize, outer_pos: &[usize], outer: &[usize], start: usize, block: [usize; 4]) -> Vec<usize> {
    let mut idx = vec![0usize; rank];
    for (p, v) in outer_pos.iter().zip(outer) {
        idx[*p] = *v;
    }
    idx[start..start + 4].copy_from_slice(&block);
    idx
}

/// Three-term rows `t^{…x y z w…} + t^{…x w y z…} + t^{…x z y w…} = 0` on the four
/// positions starting at `start` (first index fixed, the other three cycled),
/// one per outer tuple, first index, and sorted triple.
fn three_term_rows(shape: &TensorShape, start: usize, tag: RowTag) -> ConstraintSystem {
    let n = shape.dim;
    let rank = shape.rank;
    let canon = shape.canonical_map();
    let outer_pos = outside(rank, start);
    let outers: Vec<Vec<usize>> = multi_indices(n, outer_pos.len()).collect();
    let per_outer: Vec<Vec<Vec<(usize, QSqrt2)>>> = outers
        .par_iter()
        .map(|outer| {
            let mut raw = Vec::new();
            for x in 0..n {
                for y in 0..n {
                    for z in y..n {
                        for w in z..n {
                            let terms = [[x, y, z, w], [x, w, y, z], [x, z, y, w]];
                            raw.push(
                                terms
                                    .iter()
                                    .map(|b| (flatten(n, &assemble(rank, &outer_pos, outer, start, *b)), QSqrt2::ONE))
                                    .collect(),
                            );
                        }
                    }
                }
            }
            raw
        })
        .collect();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for raw in per_outer {
        rows.extend(canonical_rows(&canon, raw, tag, &mut seen));
    }
    ConstraintSystem::from_rows(shape.ncols(), rows)
}

/// Cubic coordinate-change rows `a^{ijkl} + a^{iljk} + a^{ikjl} = 0` for rank-4 `a`.
pub fn gen_cubic_change_constraints(n: usize) -> ConstraintSystem {
    gen_cubic_change_constraints_on(&TensorShape::weyl4(n), 0)
}

/// Cubic coordinate-change rows on the four positions starting at `start`
/// (pairs `(start, start+1)` and `(start+2, start+3)`).
pub fn gen_cubic_change_constraints_on(shape: &TensorShape, start: usize) -> ConstraintSystem {
    three_term_rows(shape, start, RowTag::CubicChange)
}

/// Quadratic coordinate-change rows for `γ^{ijklqrst}` (block on the last four).
pub fn gen_quadratic_change_constraints(n: usize) -> ConstraintSystem {
    gen_quadratic_change_constraints_on(&TensorShape::gamma8(n), 4)
}

fn ordered(pair: (usize, usize)) -> Vec<(usize, usize)> {
    if pair.0 == pair.1 {
        vec![pair]
    } else {
        vec![pair, (pair.1, pair.0)]
    }
}

/// Quadratic coordinate-change rows on the four positions starting at `start`:
/// the pure third-derivative family and, for every unordered pair `{P1, P2}` of
/// unordered index pairs, the polarised second-derivative family
/// `Σ_{(x,z) ∈ P1, (y,w) ∈ P2} t^{…x y z w…}` (plus `P1 ↔ P2` when distinct).
pub fn gen_quadratic_change_constraints_on(shape: &TensorShape, start: usize) -> ConstraintSystem {
    let n = shape.dim;
    let rank = shape.rank;
    let mut sys = three_term_rows(shape, start, RowTag::QuadraticChange(QuadraticFamily::C));

    let canon = shape.canonical_map();
    let outer_pos = outside(rank, start);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let outers: Vec<Vec<usize>> = multi_indices(n, outer_pos.len()).collect();
    let per_outer: Vec<RowPair> = outers
        .par_iter()
        .map(|outer| {
            let mut diag = Vec::new();
            let mut mixed = Vec::new();
            for (p, &p1) in pairs.iter().enumerate() {
                for &p2 in &pairs[p..] {
                    let mut row = Vec::new();
                    let mut add = |a: (usize, usize), b: (usize, usize)| {
                        for (x, z) in ordered(a) {
                            for (y, w) in ordered(b) {
                                let idx = assemble(rank, &outer_pos, outer, start, [x, y, z, w]);
                                row.push((flatten(n, &idx), QSqrt2::ONE));
                            }
                        }
                    };
                    add(p1, p2);
                    if p1 != p2 {
                        add(p2, p1);
                        mixed.push(row);
                    } else {
                        diag.push(row);
                    }
                }
            }
            (diag, mixed)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (diag, mixed) in per_outer {
        rows.extend(canonical_rows(&canon, diag, RowTag::QuadraticChange(QuadraticFamily::BDiagonal), &mut seen));
        rows.extend(canonical_rows(&canon, mixed, RowTag::QuadraticChange(QuadraticFamily::BMixed), &mut seen));
    }
    sys.extend(ConstraintSystem::from_rows(shape.ncols(), rows));
    sys
}

/// Rows from the quadratic change's effect on `D_{K,l}`, for `η^{IjKl}` of
/// shape [`TensorShape::matter_eta`]: the diagonal choice `b^t_tt = 1` and the
/// off-diagonal choices `b^t_ts = b^t_st = 1` with `s ≠ t`.
pub fn gen_matter_mixing_constraints(n: usize, m: usize) -> ConstraintSystem {
    let shape = TensorShape::matter_eta(n, m);
    let canon = shape.canonical_map();
    let rank = shape.rank;
    let prefixes: Vec<Vec<usize>> = multi_indices(n, m + 1).collect();
    let per_prefix: Vec<RowPair> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut idx = vec![0usize; rank];
            idx[..m + 1].copy_from_slice(prefix);
            let mut flat_of = |q: &[usize], last: usize| {
                idx[m + 1..2 * m + 1].copy_from_slice(q);
                idx[2 * m + 1] = last;
                flatten(n, &idx)
            };
            let mut diag = Vec::new();
            let mut off = Vec::new();
            for q in multi_indices(n, m) {
                for t in 0..n {
                    let deg = q.iter().filter(|&&v| v == t).count() as i64;
                    if deg == 0 {
                        continue;
                    }
                    diag.push(vec![(flat_of(&q, t), QSqrt2::from_integer(deg))]);
                    for s in (0..n).filter(|&s| s != t) {
                        let mut row = Vec::new();
                        for r in (0..m).filter(|&r| q[r] == t) {
                            row.push((flat_of(&q, s), QSqrt2::ONE));
                            let mut q2 = q.clone();
                            q2[r] = s;
                            row.push((flat_of(&q2, t), QSqrt2::ONE));
                        }
                        off.push(row);
                    }
                }
            }
            (diag, off)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (diag, off) in per_prefix {
        rows.extend(canonical_rows(&canon, diag, RowTag::MatterMixing(MixingFamily::Diagonal), &mut seen));
        rows.extend(canonical_rows(&canon, off, RowTag::MatterMixing(MixingFamily::OffDiagonal), &mut seen));
    }
    ConstraintSystem::from_rows(shape.ncols(), rows)
}

/// `t = sign · t`: one row `2 x_c = 0` per canonical column when `sign = −1`,
/// nothing when `sign = +1`.
pub fn gen_parity_constraints(shape: &TensorShape, sign: i32) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new(shape.ncols());
    if sign >= 0 {
        return sys;
    }
    for c in shape.canonical_columns() {
        sys.rows.push(vec![(c, QSqrt2::from_integer(2))]);
        sys.tags.push(RowTag::Parity);
    }
    sys
}
