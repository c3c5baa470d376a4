//! Point jets of a metric and of a matter field, and how they change under a
//! third-order change of coordinates.
//!
//! A [`ChartChange3`] stores the first three derivatives at `p` of the old
//! coordinates `x` as functions of the new ones `x̃`:
//! `jac[i][a] = ∂x^i/∂x̃^a`, `hess[i][a][b] = ∂²x^i/∂x̃^a∂x̃^b`,
//! `third[i][a][b][c] = ∂³x^i/∂x̃^a∂x̃^b∂x̃^c`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact_ring::{QSqrt2, Rational, RingError, Scalar};
use crate::tensor::{multi_indices, DenseArray};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JetError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("metric is singular at the point")]
    SingularMetric,
    #[error("jet is not in Lorentz normal form (g = η, ∂g = 0)")]
    NotLorentzNormal,
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("matter rank must be at least 1")]
    InvalidMatterRank,
}

impl From<RingError> for JetError {
    fn from(_: RingError) -> Self {
        JetError::SingularMetric
    }
}

/// Diagonal signature `η = diag(ε_0, …, ε_{n−1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    eps: Vec<i8>,
}

impl Signature {
    /// `(−1, +1, …, +1)`
    pub fn lorentz(n: usize) -> Self {
        let mut eps = vec![1; n];
        if n > 0 {
            eps[0] = -1;
        }
        Signature { eps }
    }

    pub fn from_eps(eps: Vec<i8>) -> Option<Self> {
        eps.iter().all(|e| *e == 1 || *e == -1).then_some(Signature { eps })
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self, i: usize) -> i64 {
        self.eps[i] as i64
    }

    /// `η_ij` (equal to `η^ij` for a diagonal ±1 metric).
    pub fn eta<F: Scalar>(&self) -> DenseArray<F> {
        let n = self.dim();
        DenseArray::from_fn(n, 2, |ix| {
            if ix[0] == ix[1] {
                F::from_i64(self.eps(ix[0]))
            } else {
                F::zero()
            }
        })
    }
}

/// `(g_ij, g_ij,k, g_ij,kl)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet2<F> {
    pub g: DenseArray<F>,
    pub dg: DenseArray<F>,
    pub ddg: DenseArray<F>,
}

/// `(D_I, D_I,j)` for a rank-`m` covariant tensor field; the derivative index is last.
#[derive(Debug, Clone, PartialEq)]
pub struct MatterJet1<F> {
    pub d: DenseArray<F>,
    pub dd: DenseArray<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartChange3<F> {
    pub jac: DenseArray<F>,
    pub hess: DenseArray<F>,
    pub third: DenseArray<F>,
}

impl<F: Scalar> MetricJet2<F> {
    pub fn new(g: DenseArray<F>, dg: DenseArray<F>, ddg: DenseArray<F>) -> Result<Self, JetError> {
        let n = g.dim();
        for (arr, rank) in [(&g, 2), (&dg, 3), (&ddg, 4)] {
            if arr.dim() != n {
                return Err(JetError::DimensionMismatch { expected: n, found: arr.dim() });
            }
            debug_assert_eq!(arr.rank(), rank);
        }
        Ok(MetricJet2 { g, dg, ddg })
    }

    /// The flat jet `(η, 0, 0)`.
    pub fn flat(sig: &Signature) -> Self {
        let n = sig.dim();
        MetricJet2 {
            g: sig.eta(),
            dg: DenseArray::filled(n, 3, F::zero()),
            ddg: DenseArray::filled(n, 4, F::zero()),
        }
    }

    /// `(η, 0, ddg)`; `ddg` is taken as given.
    pub fn normal(sig: &Signature, ddg: DenseArray<F>) -> Self {
        let n = sig.dim();
        MetricJet2 { g: sig.eta(), dg: DenseArray::filled(n, 3, F::zero()), ddg }
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Symmetry invariants: `g` symmetric, `dg` symmetric in its first pair,
    /// `ddg` symmetric in `(i, j)` and in `(k, l)`.
    pub fn has_jet_symmetries(&self) -> bool {
        let n = self.dim();
        let close = |a: &F, b: &F| (a.clone() - b.clone()).is_negligible();
        for i in 0..n {
            for j in 0..n {
                if !close(&self.g[[i, j]], &self.g[[j, i]]) {
                    return false;
                }
                for k in 0..n {
                    if !close(&self.dg[[i, j, k]], &self.dg[[j, i, k]]) {
                        return false;
                    }
                    for l in 0..n {
                        let v = &self.ddg[[i, j, k, l]];
                        if !close(v, &self.ddg[[j, i, k, l]]) || !close(v, &self.ddg[[i, j, l, k]]) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

impl<F: Scalar> MatterJet1<F> {
    pub fn new(d: DenseArray<F>, dd: DenseArray<F>) -> Result<Self, JetError> {
        if d.dim() != dd.dim() {
            return Err(JetError::DimensionMismatch { expected: d.dim(), found: dd.dim() });
        }
        if d.rank() == 0 || dd.rank() != d.rank() + 1 {
            return Err(JetError::InvalidMatterRank);
        }
        Ok(MatterJet1 { d, dd })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        MatterJet1 { d: DenseArray::filled(n, m, F::zero()), dd: DenseArray::filled(n, m + 1, F::zero()) }
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    pub fn rank(&self) -> usize {
        self.d.rank()
    }
}

impl<F: Scalar> ChartChange3<F> {
    pub fn identity(n: usize) -> Self {
        Self::linear(identity_matrix(n))
    }

    /// `x ↦ −x`
    pub fn parity(n: usize) -> Self {
        Self::linear(identity_matrix::<F>(n).map(|v| -v.clone()))
    }

    /// A linear change with the given Jacobian and vanishing higher derivatives.
    pub fn linear(jac: DenseArray<F>) -> Self {
        let n = jac.dim();
        ChartChange3 {
            jac,
            hess: DenseArray::filled(n, 3, F::zero()),
            third: DenseArray::filled(n, 4, F::zero()),
        }
    }

    pub fn dim(&self) -> usize {
        self.jac.dim()
    }

    /// Chain rule for `x(x̃(x̂))`: `self` gives `x(x̃)`, `inner` gives `x̃(x̂)`.
    pub fn compose(&self, inner: &ChartChange3<F>) -> Result<ChartChange3<F>, JetError> {
        let n = self.dim();
        check_dim(n, inner.dim())?;
        let (j1, h1, t1) = (&self.jac, &self.hess, &self.third);
        let (j2, h2, t2) = (&inner.jac, &inner.hess, &inner.third);

        let jac = DenseArray::from_fn(n, 2, |ix| {
            sum(n, |d| j1[[ix[0], d]].clone() * j2[[d, ix[1]]].clone())
        });

        // H1 with both lower slots pulled back by J2: H1^i_de J2^d_a J2^e_b
        let h1_jj = transform_positions(&transform_positions(h1, 1, j2), 2, j2);
        let hess = DenseArray::from_fn(n, 3, |ix| {
            let (i, a, b) = (ix[0], ix[1], ix[2]);
            h1_jj[[i, a, b]].clone() + sum(n, |d| j1[[i, d]].clone() * h2[[d, a, b]].clone())
        });

        let t1_jjj = transform_positions(
            &transform_positions(&transform_positions(t1, 1, j2), 2, j2),
            3,
            j2,
        );
        // H1^i_de J2^e_x, used against each H2 slot
        let h1_j = transform_positions(h1, 2, j2);
        let third = DenseArray::from_fn(n, 4, |ix| {
            let (i, a, b, c) = (ix[0], ix[1], ix[2], ix[3]);
            let mixed = sum(n, |d| {
                h2[[d, b, c]].clone() * h1_j[[i, d, a]].clone()
                    + h2[[d, a, c]].clone() * h1_j[[i, d, b]].clone()
                    + h2[[d, a, b]].clone() * h1_j[[i, d, c]].clone()
            });
            t1_jjj[[i, a, b, c]].clone()
                + mixed
                + sum(n, |d| j1[[i, d]].clone() * t2[[d, a, b, c]].clone())
        });
        Ok(ChartChange3 { jac, hess, third })
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), JetError> {
    if expected != found {
        Err(JetError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

fn sum<F: Scalar>(n: usize, mut f: impl FnMut(usize) -> F) -> F {
    let mut acc = F::zero();
    for k in 0..n {
        acc = acc + f(k);
    }
    acc
}

pub fn identity_matrix<F: Scalar>(n: usize) -> DenseArray<F> {
    DenseArray::from_fn(n, 2, |ix| if ix[0] == ix[1] { F::one() } else { F::zero() })
}

/// Replaces slot `pos` of `t` by `Σ_a m[a][i] t[…, a, …]`.
pub fn transform_positions<F: Scalar>(t: &DenseArray<F>, pos: usize, m: &DenseArray<F>) -> DenseArray<F> {
    let n = t.dim();
    let mut src = vec![0usize; t.rank()];
    DenseArray::from_fn(n, t.rank(), |ix| {
        src.copy_from_slice(ix);
        let i = ix[pos];
        let mut acc = F::zero();
        for a in 0..n {
            let w = &m[[a, i]];
            if w.is_zero() {
                continue;
            }
            src[pos] = a;
            acc = acc + w.clone() * t.get(&src).clone();
        }
        acc
    })
}

/// Applies the Jacobian to every slot of `t` (tensorial pull-back of a covariant tensor).
pub fn pull_back<F: Scalar>(t: &DenseArray<F>, jac: &DenseArray<F>) -> DenseArray<F> {
    (0..t.rank()).fold(t.clone(), |acc, pos| transform_positions(&acc, pos, jac))
}

/// Components of the same 2-jet in the new chart.
pub fn transform_metric_jet<F: Scalar>(
    jet: &MetricJet2<F>,
    ch: &ChartChange3<F>,
) -> Result<MetricJet2<F>, JetError> {
    let n = jet.dim();
    check_dim(n, ch.dim())?;
    let (jac, h, t) = (&ch.jac, &ch.hess, &ch.third);

    // g0[a][j] = g_ab J^b_j
    let g0 = transform_positions(&jet.g, 1, jac);
    let g_new = transform_positions(&g0, 0, jac);

    // dg with slots (1, 2) / (0, 1) pulled back.
    let dg_12 = transform_positions(&transform_positions(&jet.dg, 1, jac), 2, jac);
    let dg_01 = transform_positions(&transform_positions(&jet.dg, 0, jac), 1, jac);
    let dg_all = transform_positions(&dg_01, 2, jac);

    let dg_new = DenseArray::from_fn(n, 3, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        dg_all[[i, j, k]].clone()
            + sum(n, |a| h[[a, i, k]].clone() * g0[[a, j]].clone() + h[[a, j, k]].clone() * g0[[a, i]].clone())
    });

    // hg[i][k][b] = H^a_ik g_ab
    let hg = DenseArray::from_fn(n, 3, |ix| sum(n, |a| h[[a, ix[0], ix[1]]].clone() * jet.g[[a, ix[2]]].clone()));
    let ddg_all = pull_back(&jet.ddg, jac);

    let ddg_new = DenseArray::from_fn(n, 4, |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let first_order = sum(n, |a| {
            h[[a, i, k]].clone() * dg_12[[a, j, l]].clone()
                + h[[a, j, k]].clone() * dg_12[[a, i, l]].clone()
                + h[[a, i, l]].clone() * dg_12[[a, j, k]].clone()
                + h[[a, j, l]].clone() * dg_12[[a, i, k]].clone()
                + h[[a, k, l]].clone() * dg_01[[i, j, a]].clone()
        });
        let zeroth_order = sum(n, |b| {
            hg[[i, k, b]].clone() * h[[b, j, l]].clone() + hg[[i, l, b]].clone() * h[[b, j, k]].clone()
                + t[[b, i, k, l]].clone() * g0[[b, j]].clone()
                + t[[b, j, k, l]].clone() * g0[[b, i]].clone()
        });
        ddg_all[[i, j, k, l]].clone() + first_order + zeroth_order
    });

    Ok(MetricJet2 { g: g_new, dg: dg_new, ddg: ddg_new })
}

/// Components of the same matter 1-jet in the new chart.
pub fn transform_matter_jet<F: Scalar>(
    mjet: &MatterJet1<F>,
    ch: &ChartChange3<F>,
) -> Result<MatterJet1<F>, JetError> {
    let n = mjet.dim();
    let m = mjet.rank();
    check_dim(n, ch.dim())?;
    let (jac, h) = (&ch.jac, &ch.hess);

    let d_new = pull_back(&mjet.d, jac);
    let dd_all = pull_back(&mjet.dd, jac);

    let mut dd_new = dd_all;
    // One Hessian term per slot of D: Σ_a H^a_{i_r j} D_{i_1 … a … i_m}.
    for r in 0..m {
        let partial = (0..m)
            .filter(|&p| p != r)
            .fold(mjet.d.clone(), |acc, p| transform_positions(&acc, p, jac));
        let mut src = vec![0usize; m];
        for ix in multi_indices(n, m + 1) {
            let j = ix[m];
            src.copy_from_slice(&ix[..m]);
            let ir = ix[r];
            let extra = sum(n, |a| {
                src[r] = a;
                h[[a, ir, j]].clone() * partial.get(&src).clone()
            });
            let slot = dd_new.get_mut(&ix);
            *slot = slot.clone() + extra;
        }
    }
    Ok(MatterJet1 { d: d_new, dd: dd_new })
}

/// True iff `g = η` and `∂g = 0` (exactly, or within 1e−12 in float mode).
pub fn is_lorentz_normal<F: Scalar>(jet: &MetricJet2<F>) -> bool {
    let eta: DenseArray<F> = Signature::lorentz(jet.dim()).eta();
    jet.g
        .as_slice()
        .iter()
        .zip(eta.as_slice())
        .all(|(a, b)| (a.clone() - b.clone()).is_negligible())
        && jet.dg.as_slice().iter().all(|v| v.is_negligible())
}

/// Inverse of a square matrix by Gauss–Jordan elimination with largest-magnitude pivoting.
pub fn invert_matrix<F: Scalar>(m: &DenseArray<F>) -> Result<DenseArray<F>, JetError> {
    let n = m.dim();
    let mut a: Vec<Vec<F>> = (0..n).map(|i| (0..n).map(|j| m[[i, j]].clone()).collect()).collect();
    let mut inv: Vec<Vec<F>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { F::one() } else { F::zero() }).collect()).collect();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&x, &y| a[x][col].magnitude().total_cmp(&a[y][col].magnitude()).then(y.cmp(&x)))
            .ok_or(JetError::SingularMetric)?;
        if !F::EXACT && a[pivot][col].magnitude() < 1e-14 {
            return Err(JetError::SingularMetric);
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].inv()?;
        for c in 0..n {
            a[col][c] = a[col][c].clone() * p.clone();
            inv[col][c] = inv[col][c].clone() * p.clone();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                a[r][c] = a[r][c].clone() - f.clone() * a[col][c].clone();
                inv[r][c] = inv[r][c].clone() - f.clone() * inv[col][c].clone();
            }
        }
    }
    Ok(DenseArray::from_fn(n, 2, |ix| inv[ix[0]][ix[1]].clone()))
}

/// How [`sample_instance`] draws the metric jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// `g = η`, `∂g = 0`, random `∂²g`.
    NormalAtP,
    /// `g = η` plus a bounded perturbation, random `∂g` and `∂²g`.
    Generic,
}

/// Random draws used by the samplers: small integers in exact mode, uniform
/// reals in float mode.
pub trait SampleScalar: Scalar {
    /// Jet entry: `{−2, …, 2}` exactly or `[−1, 1]`.
    fn jet_entry<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Offset of size at most 1/2: `{−2, …, 2}/4` exactly or `[−1/2, 1/2]`.
    fn small_offset<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl SampleScalar for QSqrt2 {
    fn jet_entry<R: Rng + ?Sized>(rng: &mut R) -> Self {
        QSqrt2::from_integer(rng.random_range(-2..=2))
    }

    fn small_offset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        QSqrt2::from_rational(Rational::new(rng.random_range(-2..=2), 4).unwrap())
    }
}

impl SampleScalar for f64 {
    fn jet_entry<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-1.0..=1.0)
    }

    fn small_offset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-0.5..=0.5)
    }
}

/// Random `∂²g` with `(i, j)` and `(k, l)` symmetry.
pub fn random_ddg<F: SampleScalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<F> {
    let mut ddg = DenseArray::filled(n, 4, F::zero());
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                for l in k..n {
                    let v = F::jet_entry(rng);
                    for (a, b) in [(i, j), (j, i)] {
                        for (c, d) in [(k, l), (l, k)] {
                            ddg[[a, b, c, d]] = v.clone();
                        }
                    }
                }
            }
        }
    }
    ddg
}

fn random_dg<F: SampleScalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<F> {
    let mut dg = DenseArray::filled(n, 3, F::zero());
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let v = F::jet_entry(rng);
                dg[[i, j, k]] = v.clone();
                dg[[j, i, k]] = v;
            }
        }
    }
    dg
}

pub fn random_matter_jet<F: SampleScalar, R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> MatterJet1<F> {
    MatterJet1 {
        d: DenseArray::from_fn(n, m, |_| F::jet_entry(rng)),
        dd: DenseArray::from_fn(n, m + 1, |_| F::jet_entry(rng)),
    }
}

/// Random chart change with `J` within 1/2 of the identity (entrywise) and invertible,
/// `H` symmetric in its lower pair and `T` fully symmetric in its lower triple.
pub fn random_chart_change<F: SampleScalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> ChartChange3<F> {
    let jac = loop {
        let j = DenseArray::from_fn(n, 2, |ix| {
            let base = if ix[0] == ix[1] { F::one() } else { F::zero() };
            base + F::small_offset(rng)
        });
        if invert_matrix(&j).is_ok() {
            break j;
        }
    };
    let mut hess = DenseArray::filled(n, 3, F::zero());
    for i in 0..n {
        for a in 0..n {
            for b in a..n {
                let v = F::jet_entry(rng);
                hess[[i, a, b]] = v.clone();
                hess[[i, b, a]] = v;
            }
        }
    }
    let mut third = DenseArray::filled(n, 4, F::zero());
    for i in 0..n {
        for a in 0..n {
            for b in a..n {
                for c in b..n {
                    let v = F::jet_entry(rng);
                    for p in permutations3(a, b, c) {
                        third[[i, p[0], p[1], p[2]]] = v.clone();
                    }
                }
            }
        }
    }
    ChartChange3 { jac, hess, third }
}

pub(crate) fn permutations3(a: usize, b: usize, c: usize) -> [[usize; 3]; 6] {
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

/// `(metric jet, matter jet, chart change)`.
pub type Instance<F> = (MetricJet2<F>, MatterJet1<F>, ChartChange3<F>);

/// Deterministic random instance.
pub fn sample_instance<F: SampleScalar>(
    n: usize,
    m: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<Instance<F>, JetError> {
    if n < 2 {
        return Err(JetError::InvalidDimension(n));
    }
    if m < 1 {
        return Err(JetError::InvalidMatterRank);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with_rng(n, m, mode, &mut rng))
}

pub fn sample_with_rng<F: SampleScalar, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    mode: SampleMode,
    rng: &mut R,
) -> (MetricJet2<F>, MatterJet1<F>, ChartChange3<F>) {
    let sig = Signature::lorentz(n);
    let jet = match mode {
        SampleMode::NormalAtP => MetricJet2::normal(&sig, random_ddg(n, rng)),
        SampleMode::Generic => {
            let eta = sig.eta::<F>();
            let g = loop {
                let mut g = eta.clone();
                for i in 0..n {
                    for j in i..n {
                        let v = F::small_offset(rng).half();
                        g[[i, j]] = g[[i, j]].clone() + v.clone();
                        if i != j {
                            g[[j, i]] = g[[j, i]].clone() + v;
                        }
                    }
                }
                if invert_matrix(&g).is_ok() {
                    break g;
                }
            };
            MetricJet2 { g, dg: random_dg(n, rng), ddg: random_ddg(n, rng) }
        }
    };
    let mjet = random_matter_jet(n, m, rng);
    let ch = random_chart_change(n, rng);
    (jet, mjet, ch)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = QSqrt2;

    fn exact_instance(n: usize, seed: u64, mode: SampleMode) -> (MetricJet2<Q>, MatterJet1<Q>, ChartChange3<Q>) {
        sample_instance(n, 2, seed, mode).unwrap()
    }

    #[test]
    fn identity_change_is_a_no_op() {
        for n in 2..=4 {
            let (jet, mjet, _) = exact_instance(n, 3, SampleMode::Generic);
            let id = ChartChange3::identity(n);
            assert_eq!(transform_metric_jet(&jet, &id).unwrap(), jet);
            assert_eq!(transform_matter_jet(&mjet, &id).unwrap(), mjet);
        }
    }

    #[test]
    fn parity_flips_odd_derivative_orders() {
        let (jet, _, _) = exact_instance(3, 5, SampleMode::Generic);
        let out = transform_metric_jet(&jet, &ChartChange3::parity(3)).unwrap();
        assert_eq!(out.g, jet.g);
        assert_eq!(out.dg, jet.dg.map(|v| -v.clone()));
        assert_eq!(out.ddg, jet.ddg);

        let mjet: MatterJet1<Q> = sample_instance(3, 2, 9, SampleMode::Generic).unwrap().1;
        let mout = transform_matter_jet(&mjet, &ChartChange3::parity(3)).unwrap();
        assert_eq!(mout.d, mjet.d);
        assert_eq!(mout.dd, mjet.dd.map(|v| -v.clone()));
    }

    #[test]
    fn cubic_change_shifts_second_derivatives() {
        // x^i = x̃^i + (1/6) η_ia c^a_jkl x̃^j x̃^k x̃^l  ⇒  g̃_ij,kl = g_ij,kl + c^j_ikl + c^i_jkl
        let n = 3;
        let sig = Signature::lorentz(n);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jet = MetricJet2::<Q>::normal(&sig, random_ddg(n, &mut rng));
        let mut c = DenseArray::filled(n, 4, Q::zero());
        for i in 0..n {
            for a in 0..n {
                for b in a..n {
                    for d in b..n {
                        let v = Q::from_integer(rng.random_range(-2..=2));
                        for p in permutations3(a, b, d) {
                            c[[i, p[0], p[1], p[2]]] = v.clone();
                        }
                    }
                }
            }
        }
        let mut ch = ChartChange3::identity(n);
        ch.third = DenseArray::from_fn(n, 4, |ix| {
            Q::from_integer(sig.eps(ix[0])) * c[[ix[0], ix[1], ix[2], ix[3]]].clone()
        });
        let out = transform_metric_jet(&jet, &ch).unwrap();
        assert!(is_lorentz_normal(&out));
        for ix in multi_indices(n, 4) {
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            let expected = jet.ddg[[i, j, k, l]].clone() + c[[j, i, k, l]].clone() + c[[i, j, k, l]].clone();
            assert_eq!(out.ddg[[i, j, k, l]], expected);
        }
    }

    #[test]
    fn quadratic_change_shifts_matter_derivatives() {
        // J = I, H = b:  D̃_K,l = D_K,l + Σ_r b^a_{k_r l} D_{k_1 … a … k_m}
        let n = 3;
        let m = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mjet: MatterJet1<Q> = random_matter_jet(n, m, &mut rng);
        let mut ch: ChartChange3<Q> = random_chart_change(n, &mut rng);
        ch.jac = identity_matrix(n);
        ch.third = DenseArray::filled(n, 4, Q::zero());
        let b = ch.hess.clone();
        let out = transform_matter_jet(&mjet, &ch).unwrap();
        assert_eq!(out.d, mjet.d);
        for ix in multi_indices(n, m + 1) {
            let (k1, k2, l) = (ix[0], ix[1], ix[2]);
            let mut expected = mjet.dd[[k1, k2, l]].clone();
            for a in 0..n {
                expected = expected + b[[a, k1, l]].clone() * mjet.d[[a, k2]].clone();
                expected = expected + b[[a, k2, l]].clone() * mjet.d[[k1, a]].clone();
            }
            assert_eq!(out.dd[[k1, k2, l]], expected);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_well_formed() {
        let a = exact_instance(4, 42, SampleMode::Generic);
        let b = exact_instance(4, 42, SampleMode::Generic);
        assert_eq!(a, b);
        let (normal, _, ch) = exact_instance(4, 42, SampleMode::NormalAtP);
        assert!(is_lorentz_normal(&normal));
        assert!(normal.has_jet_symmetries());
        for ix in multi_indices(4, 2) {
            let off = ch.jac[[ix[0], ix[1]]].clone() - if ix[0] == ix[1] { Q::one() } else { Q::zero() };
            assert!(off.to_f64().abs() <= 0.5);
        }
    }

    #[test]
    fn generic_metrics_are_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (jet, _, _) = sample_with_rng::<Q, _>(4, 1, SampleMode::Generic, &mut rng);
            let inv = invert_matrix(&jet.g).unwrap();
            for ix in multi_indices(4, 2) {
                let p = sum(4, |k| jet.g[[ix[0], k]].clone() * inv[[k, ix[1]]].clone());
                assert_eq!(p, if ix[0] == ix[1] { Q::one() } else { Q::zero() });
            }
        }
    }

    #[test]
    fn normal_form_detection() {
        let sig = Signature::lorentz(3);
        assert!(is_lorentz_normal(&MetricJet2::<Q>::flat(&sig)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(is_lorentz_normal(&MetricJet2::<f64>::normal(&sig, random_ddg(3, &mut rng))));
        let mut bent = MetricJet2::<Q>::flat(&sig);
        bent.dg[[0, 0, 1]] = Q::one();
        assert!(!is_lorentz_normal(&bent));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let jet = MetricJet2::<f64>::flat(&Signature::lorentz(3));
        let ch = ChartChange3::<f64>::identity(4);
        assert_eq!(
            transform_metric_jet(&jet, &ch),
            Err(JetError::DimensionMismatch { expected: 3, found: 4 })
        );
        assert!(sample_instance::<f64>(1, 1, 0, SampleMode::Generic).is_err());
        assert!(sample_instance::<f64>(3, 0, 0, SampleMode::Generic).is_err());
    }
}
