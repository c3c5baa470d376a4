//! Curvature of a metric 2-jet at a point, the Lorentz-normal closed forms,
//! and the `|dγ|²` invariant of a matter 1-jet.
//!
//! Sign conventions: `R^i_jkl = ∂_l Γ^i_jk − ∂_k Γ^i_jl + Γ^r_jk Γ^i_rl − Γ^r_jl Γ^i_rk`,
//! `Ric_jk = R^i_jki`, `R = g^jk Ric_jk`. With these choices `riemann_scalar`
//! and `scalar_normal` agree on every normal jet.

use thiserror::Error;

use crate::exact_ring::Scalar;
use crate::jet::{invert_matrix, is_lorentz_normal, transform_positions, JetError, MatterJet1, MetricJet2, Signature};
use crate::tensor::{multi_indices, DenseArray};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurvatureError {
    #[error("metric is singular at the point")]
    SingularMetric,
    #[error("jet is not in Lorentz normal form (g = η, ∂g = 0)")]
    NotLorentzNormal,
    #[error("dimension mismatch: metric has n = {metric}, matter field has n = {matter}")]
    DimensionMismatch { metric: usize, matter: usize },
}

impl From<JetError> for CurvatureError {
    fn from(e: JetError) -> Self {
        match e {
            JetError::DimensionMismatch { expected, found } => {
                CurvatureError::DimensionMismatch { metric: expected, matter: found }
            }
            _ => CurvatureError::SingularMetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData<F> {
    /// `Γ^i_jk`
    pub gamma2: DenseArray<F>,
    /// `R^i_jkl`
    pub riem: DenseArray<F>,
    /// `Ric^{ij}`
    pub ricci_up: DenseArray<F>,
    pub scalar: F,
}

fn acc_sum<F: Scalar>(n: usize, mut f: impl FnMut(usize) -> F) -> F {
    (0..n).fold(F::zero(), |acc, k| acc + f(k))
}

/// `Γ_ajk = ½ (g_ja,k + g_ka,j − g_jk,a)`
fn christoffel_lower<F: Scalar>(jet: &MetricJet2<F>) -> DenseArray<F> {
    let dg = &jet.dg;
    DenseArray::from_fn(jet.dim(), 3, |ix| {
        let (a, j, k) = (ix[0], ix[1], ix[2]);
        (dg[[j, a, k]].clone() + dg[[k, a, j]].clone() - dg[[j, k, a]].clone()).half()
    })
}

fn raise_first<F: Scalar>(g_inv: &DenseArray<F>, lower: &DenseArray<F>) -> DenseArray<F> {
    transform_positions(lower, 0, g_inv)
}

/// `Γ^i_jk = ½ g^{ia}(g_ja,k + g_ka,j − g_jk,a)`
pub fn christoffel<F: Scalar>(jet: &MetricJet2<F>) -> Result<DenseArray<F>, CurvatureError> {
    let g_inv = invert_matrix(&jet.g)?;
    Ok(raise_first(&g_inv, &christoffel_lower(jet)))
}

/// Full curvature data in arbitrary coordinates.
pub fn curvature<F: Scalar>(jet: &MetricJet2<F>) -> Result<CurvatureData<F>, CurvatureError> {
    let n = jet.dim();
    let g_inv = invert_matrix(&jet.g)?;
    let low = christoffel_lower(jet);
    let gamma2 = raise_first(&g_inv, &low);

    // ∂_l g^{ia} = −g^{ib} g_bc,l g^{ca}
    let dg_inv = DenseArray::from_fn(n, 3, |ix| {
        let (i, a, l) = (ix[0], ix[1], ix[2]);
        -acc_sum(n, |b| {
            g_inv[[i, b]].clone() * acc_sum(n, |c| jet.dg[[b, c, l]].clone() * g_inv[[c, a]].clone())
        })
    });
    // ∂_l Γ_ajk = ½ (g_ja,kl + g_ka,jl − g_jk,al)
    let ddg = &jet.ddg;
    let d_low = DenseArray::from_fn(n, 4, |ix| {
        let (a, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        (ddg[[j, a, k, l]].clone() + ddg[[k, a, j, l]].clone() - ddg[[j, k, a, l]].clone()).half()
    });
    // dgamma[i][j][k][l] = ∂_l Γ^i_jk
    let dgamma = DenseArray::from_fn(n, 4, |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        acc_sum(n, |a| {
            dg_inv[[i, a, l]].clone() * low[[a, j, k]].clone() + g_inv[[i, a]].clone() * d_low[[a, j, k, l]].clone()
        })
    });

    let riem = DenseArray::from_fn(n, 4, |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        dgamma[[i, j, k, l]].clone() - dgamma[[i, j, l, k]].clone()
            + acc_sum(n, |r| {
                gamma2[[r, j, k]].clone() * gamma2[[i, r, l]].clone()
                    - gamma2[[r, j, l]].clone() * gamma2[[i, r, k]].clone()
            })
    });
    let ricci = DenseArray::from_fn(n, 2, |ix| acc_sum(n, |i| riem[[i, ix[0], ix[1], i]].clone()));
    let ricci_up = transform_positions(&transform_positions(&ricci, 0, &g_inv), 1, &g_inv);
    let scalar = multi_indices(n, 2)
        .fold(F::zero(), |acc, ix| acc + g_inv[[ix[0], ix[1]]].clone() * ricci[[ix[0], ix[1]]].clone());
    Ok(CurvatureData { gamma2, riem, ricci_up, scalar })
}

/// Scalar curvature from the full expansion; valid in any chart.
pub fn riemann_scalar<F: Scalar>(jet: &MetricJet2<F>) -> Result<F, CurvatureError> {
    Ok(curvature(jet)?.scalar)
}

/// `R = Σ ε_i ε_j (g_ij,ij − g_ii,jj)` on a Lorentz-normal jet.
pub fn scalar_normal<F: Scalar>(jet: &MetricJet2<F>) -> Result<F, CurvatureError> {
    if !is_lorentz_normal(jet) {
        return Err(CurvatureError::NotLorentzNormal);
    }
    let n = jet.dim();
    let sig = Signature::lorentz(n);
    let ddg = &jet.ddg;
    Ok(multi_indices(n, 2).fold(F::zero(), |acc, ix| {
        let (i, j) = (ix[0], ix[1]);
        let term = ddg[[i, j, i, j]].clone() - ddg[[i, i, j, j]].clone();
        acc + F::from_i64(sig.eps(i) * sig.eps(j)) * term
    }))
}

/// `Ric^{ij} = ½ ε_i ε_j Σ_k ε_k (g_ik,jk + g_jk,ik − g_ij,kk − g_kk,ij)` on a Lorentz-normal jet.
pub fn ricci_up_normal<F: Scalar>(jet: &MetricJet2<F>) -> Result<DenseArray<F>, CurvatureError> {
    if !is_lorentz_normal(jet) {
        return Err(CurvatureError::NotLorentzNormal);
    }
    let n = jet.dim();
    let sig = Signature::lorentz(n);
    let ddg = &jet.ddg;
    Ok(DenseArray::from_fn(n, 2, |ix| {
        let (i, j) = (ix[0], ix[1]);
        let s = acc_sum(n, |k| {
            F::from_i64(sig.eps(k))
                * (ddg[[i, k, j, k]].clone() + ddg[[j, k, i, k]].clone()
                    - ddg[[i, j, k, k]].clone()
                    - ddg[[k, k, i, j]].clone())
        });
        (F::from_i64(sig.eps(i) * sig.eps(j)) * s).half()
    }))
}

/// Sign of a permutation given as a slice of distinct positions.
pub(crate) fn permutation_sign(p: &[usize]) -> i64 {
    let mut sign = 1;
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            if p[a] > p[b] {
                sign = -sign;
            }
        }
    }
    sign
}

/// All permutations of `0..k` in lexicographic order.
pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Factorial of a small integer.
pub(crate) fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// `(dγ)_{i_0 … i_m}` at the point, where `γ = Alt(D)` with the `1/m!` prefactor
/// and `(dγ)_{i_0…i_m} = Σ_r (−1)^r ∂_{i_r} γ_{i_0…î_r…i_m}`.
///
/// Expanding both alternations gives
/// `(dγ)_A = (−1)^m / m! · Σ_{π ∈ S_{m+1}} sgn(π) D_{a_π(0) … a_π(m−1), a_π(m)}`.
pub fn exterior_derivative<F: Scalar>(mjet: &MatterJet1<F>) -> DenseArray<F> {
    let n = mjet.dim();
    let m = mjet.rank();
    let k = m + 1;
    let perms = permutations(k);
    let signs: Vec<i64> = perms.iter().map(|p| permutation_sign(p)).collect();
    let sign_m = if m.is_multiple_of(2) { 1 } else { -1 };
    let norm = F::from_i64(factorial(m)).inv().expect("m! is nonzero");
    let mut src = vec![0usize; k];
    DenseArray::from_fn(n, k, |a| {
        // Repeated indices give zero by antisymmetry.
        for x in 0..k {
            for y in x + 1..k {
                if a[x] == a[y] {
                    return F::zero();
                }
            }
        }
        let mut total = F::zero();
        for (p, s) in perms.iter().zip(&signs) {
            for (slot, &pi) in src.iter_mut().zip(p) {
                *slot = a[pi];
            }
            let v = mjet.dd.get(&src);
            if v.is_zero() {
                continue;
            }
            total = if *s > 0 { total + v.clone() } else { total - v.clone() };
        }
        F::from_i64(sign_m) * norm.clone() * total
    })
}

/// `|dγ|²_g = (dγ)_A (dγ)_B g^{a_0 b_0} ⋯ g^{a_m b_m}`, with no factorial normalisation.
pub fn dgamma_sq<F: Scalar>(jet: &MetricJet2<F>, mjet: &MatterJet1<F>) -> Result<F, CurvatureError> {
    let n = jet.dim();
    if mjet.dim() != n {
        return Err(CurvatureError::DimensionMismatch { metric: n, matter: mjet.dim() });
    }
    if mjet.rank() + 1 > n {
        return Ok(F::zero());
    }
    let g_inv = invert_matrix(&jet.g)?;
    let dgam = exterior_derivative(mjet);
    let raised = (0..dgam.rank()).fold(dgam.clone(), |acc, pos| transform_positions(&acc, pos, &g_inv));
    Ok(dgam
        .as_slice()
        .iter()
        .zip(raised.as_slice())
        .fold(F::zero(), |acc, (x, y)| acc + x.clone() * y.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_ring::QSqrt2;
    use crate::jet::{random_ddg, random_matter_jet, sample_with_rng, SampleMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Q = QSqrt2;

    fn n2_jet() -> MetricJet2<Q> {
        let sig = Signature::lorentz(2);
        let mut ddg = DenseArray::filled(2, 4, Q::zero());
        ddg[[0, 0, 1, 1]] = Q::from_integer(3);
        MetricJet2::normal(&sig, ddg)
    }

    #[test]
    fn flat_jet_has_no_curvature() {
        for n in 2..=4 {
            let flat = MetricJet2::<Q>::flat(&Signature::lorentz(n));
            let data = curvature(&flat).unwrap();
            assert!(data.gamma2.as_slice().iter().all(|v| v.is_zero()));
            assert!(data.riem.as_slice().iter().all(|v| v.is_zero()));
            assert!(data.scalar.is_zero());
            assert!(scalar_normal(&flat).unwrap().is_zero());
            assert!(ricci_up_normal(&flat).unwrap().as_slice().iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn christoffel_single_entry() {
        let s = Q::from_integer(5);
        let mut jet = MetricJet2::<Q>::flat(&Signature::lorentz(2));
        jet.dg[[0, 0, 1]] = s.clone();
        let gamma = christoffel(&jet).unwrap();
        let minus_half_s = -(s.half());
        assert_eq!(gamma[[1, 0, 0]], minus_half_s);
        assert_eq!(gamma[[0, 0, 1]], minus_half_s);
        assert_eq!(gamma[[0, 1, 0]], minus_half_s);
    }

    #[test]
    fn normal_jet_has_vanishing_christoffels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let jet = MetricJet2::<Q>::normal(&Signature::lorentz(3), random_ddg(3, &mut rng));
        assert!(christoffel(&jet).unwrap().as_slice().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn two_dimensional_example() {
        let jet = n2_jet();
        assert_eq!(scalar_normal(&jet).unwrap(), Q::from_integer(3));
        assert_eq!(riemann_scalar(&jet).unwrap(), Q::from_integer(3));
        let ric = ricci_up_normal(&jet).unwrap();
        let three_halves = Q::from_integer(3).half();
        assert_eq!(ric[[1, 1]], three_halves);
        assert_eq!(ric[[0, 0]], -three_halves.clone());
        // η_ij Ric^ij = R
        assert_eq!(ric[[1, 1]].clone() - ric[[0, 0]].clone(), Q::from_integer(3));
        assert_eq!(curvature(&jet).unwrap().ricci_up, ric);
    }

    #[test]
    fn normal_forms_agree_with_general_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=4 {
            for _ in 0..5 {
                let jet = MetricJet2::<Q>::normal(&Signature::lorentz(n), random_ddg(n, &mut rng));
                let data = curvature(&jet).unwrap();
                assert_eq!(scalar_normal(&jet).unwrap(), data.scalar);
                let ric = ricci_up_normal(&jet).unwrap();
                assert_eq!(ric, data.ricci_up);
                let sig = Signature::lorentz(n);
                let trace = (0..n).fold(Q::zero(), |acc, i| acc + Q::from_integer(sig.eps(i)) * ric[[i, i]].clone());
                assert_eq!(trace, data.scalar);
            }
        }
    }

    #[test]
    fn stored_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (jet, _, _) = sample_with_rng::<Q, _>(3, 1, SampleMode::Generic, &mut rng);
        let data = curvature(&jet).unwrap();
        for ix in multi_indices(3, 4) {
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            assert_eq!(data.riem[[i, j, k, l]], -data.riem[[i, j, l, k]].clone());
            if l == 0 {
                assert_eq!(data.gamma2[[i, j, k]], data.gamma2[[i, k, j]]);
            }
        }
        for ix in multi_indices(3, 2) {
            assert_eq!(data.ricci_up[[ix[0], ix[1]]], data.ricci_up[[ix[1], ix[0]]]);
        }
    }

    #[test]
    fn normal_forms_reject_general_jets() {
        let mut jet = MetricJet2::<Q>::flat(&Signature::lorentz(3));
        jet.dg[[0, 1, 2]] = Q::one();
        jet.dg[[1, 0, 2]] = Q::one();
        assert_eq!(scalar_normal(&jet), Err(CurvatureError::NotLorentzNormal));
        assert_eq!(ricci_up_normal(&jet), Err(CurvatureError::NotLorentzNormal));
    }

    #[test]
    fn singular_metric_is_reported() {
        let mut jet = MetricJet2::<Q>::flat(&Signature::lorentz(2));
        jet.g[[0, 0]] = Q::zero();
        assert_eq!(riemann_scalar(&jet), Err(CurvatureError::SingularMetric));
    }

    #[test]
    fn dgamma_examples() {
        let flat = MetricJet2::<Q>::flat(&Signature::lorentz(4));
        let mut mjet = MatterJet1::<Q>::zero(4, 1);
        assert!(dgamma_sq(&flat, &mjet).unwrap().is_zero());
        mjet.dd[[1, 0]] = Q::one();
        let dg = exterior_derivative(&mjet);
        assert_eq!(dg[[0, 1]], Q::one());
        assert_eq!(dg[[1, 0]], -Q::one());
        assert_eq!(dgamma_sq(&flat, &mjet).unwrap(), Q::from_integer(-2));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let flat3 = MetricJet2::<Q>::flat(&Signature::lorentz(3));
        let big: MatterJet1<Q> = random_matter_jet(3, 3, &mut rng);
        assert!(dgamma_sq(&flat3, &big).unwrap().is_zero());
    }

    #[test]
    fn dgamma_matches_iterated_definition() {
        // Build γ = Alt(D) and its derivative explicitly, then apply the alternating sum.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, m) = (4, 2);
        let mjet: MatterJet1<Q> = random_matter_jet(n, m, &mut rng);
        let half = Q::one().half();
        // ∂_j γ_{ab} = ½ (D_ab,j − D_ba,j)
        let dgam_partial = |a: usize, b: usize, j: usize| {
            half.clone() * (mjet.dd[[a, b, j]].clone() - mjet.dd[[b, a, j]].clone())
        };
        let direct = exterior_derivative(&mjet);
        for ix in multi_indices(n, 3) {
            let (i0, i1, i2) = (ix[0], ix[1], ix[2]);
            let expected = dgam_partial(i1, i2, i0) - dgam_partial(i0, i2, i1) + dgam_partial(i0, i1, i2);
            assert_eq!(direct[[i0, i1, i2]], expected);
        }
    }
}
