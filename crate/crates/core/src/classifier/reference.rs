//! Reference coefficient tensors: the known invariants each classification is
//! compared against, written out from their normal-coordinate closed forms.

use crate::curvature::{factorial, permutation_sign, permutations};
use crate::exact_ring::{QSqrt2, Rational};
use crate::jet::Signature;
use crate::symmetry::{CoefficientTensor, TensorShape};
use crate::tensor::{flatten, multi_indices};

fn eps(sig: &Signature, i: usize) -> i64 {
    sig.eps(i)
}

fn q(r: Rational) -> QSqrt2 {
    QSqrt2::from_rational(r)
}

/// Pair-symmetric `a^{ijkl}` with `a^{ijkl} g_ij,kl = R` on Lorentz-normal jets.
pub fn reference_scalar_coeffs(n: usize) -> CoefficientTensor {
    let sig = Signature::lorentz(n);
    let mut raw = CoefficientTensor::zeros(TensorShape::weyl4(n));
    for i in 0..n {
        for j in 0..n {
            let s = QSqrt2::from_integer(eps(&sig, i) * eps(&sig, j));
            raw.add_at(&[i, j, i, j], &s);
            raw.add_at(&[i, i, j, j], &(-&s));
        }
    }
    raw.symmetrized()
}

/// Coefficient tensors reproducing `Ric^{ij}`, `R g^{ij}` (rank 6) and `g^{ij}` (rank 2)
/// on Lorentz-normal jets.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorReference {
    pub ric: CoefficientTensor,
    pub rg: CoefficientTensor,
    pub g: CoefficientTensor,
}

pub fn reference_tensor_coeffs(n: usize) -> TensorReference {
    let sig = Signature::lorentz(n);
    let half = Rational::new(1, 2).unwrap();
    let mut ric = CoefficientTensor::zeros(TensorShape::einstein6(n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let s = q(&half * &Rational::from_integer(eps(&sig, i) * eps(&sig, j) * eps(&sig, k)));
                ric.add_at(&[i, j, i, k, j, k], &s);
                ric.add_at(&[i, j, j, k, i, k], &s);
                ric.add_at(&[i, j, i, j, k, k], &(-&s));
                ric.add_at(&[i, j, k, k, i, j], &(-&s));
            }
        }
    }
    let ric = ric.symmetrized();

    let scalar = reference_scalar_coeffs(n);
    let mut rg = CoefficientTensor::zeros(TensorShape::einstein6(n));
    let mut g = CoefficientTensor::zeros(TensorShape::symmetric2(n));
    for i in 0..n {
        let e = QSqrt2::from_integer(eps(&sig, i));
        g.set(&[i, i], e.clone());
        for klmp in multi_indices(n, 4) {
            let v = scalar.get(&klmp);
            if !v.is_zero() {
                rg.set(&[i, i, klmp[0], klmp[1], klmp[2], klmp[3]], &e * v);
            }
        }
    }
    TensorReference { ric, rg, g }
}

/// Weights `w(A, X)` with `(dγ)_A = Σ_X w(A, X) D_X`, where `X` runs over
/// derivative-last index tuples of `dD`; only for `A` with distinct entries.
fn dgamma_weights(n: usize, m: usize, a: &[usize]) -> Vec<(usize, QSqrt2)> {
    let k = m + 1;
    let sign_m = if m.is_multiple_of(2) { 1 } else { -1 };
    let norm = Rational::new(sign_m, factorial(m)).unwrap();
    let mut x = vec![0usize; k];
    permutations(k)
        .into_iter()
        .map(|p| {
            for (slot, &pi) in x.iter_mut().zip(&p) {
                *slot = a[pi];
            }
            let w = &norm * &Rational::from_integer(permutation_sign(&p));
            (flatten(n, &x), q(w))
        })
        .collect()
}

/// `η^{IjKl}` with `η^{IjKl} D_{I,j} D_{K,l} = |dγ|²` when `g = η`; zero when `m + 1 > n`.
pub fn reference_dgamma_coeffs(n: usize, m: usize) -> CoefficientTensor {
    let shape = TensorShape::matter_eta(n, m);
    let mut out = CoefficientTensor::zeros(shape);
    let k = m + 1;
    if k > n {
        return out;
    }
    let sig = Signature::lorentz(n);
    let block = n.pow(k as u32);
    for a in multi_indices(n, k) {
        let distinct = (0..k).all(|x| (x + 1..k).all(|y| a[x] != a[y]));
        if !distinct {
            continue;
        }
        let e: i64 = a.iter().map(|&i| eps(&sig, i)).product();
        let ws = dgamma_weights(n, m, &a);
        for (fx, wx) in &ws {
            for (fy, wy) in &ws {
                let v = &(wx * wy) * &QSqrt2::from_integer(e);
                out.entries[fx * block + fy] += &v;
            }
        }
    }
    out
}

/// Perfect matchings of `0..k`, each as a list of pairs.
pub fn perfect_matchings(k: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(rest: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if rest.is_empty() {
            out.push(acc.clone());
            return;
        }
        let first = rest[0];
        for p in 1..rest.len() {
            acc.push((first, rest[p]));
            let remaining: Vec<usize> = rest[1..].iter().copied().filter(|&v| v != rest[p]).collect();
            rec(&remaining, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if k.is_multiple_of(2) {
        let all: Vec<usize> = (0..k).collect();
        rec(&all, &mut Vec::new(), &mut out);
    }
    out
}

/// Products of `η^{ab}` over every perfect matching of `k` index slots, as dense vectors.
/// Empty for odd `k`; the single constant `1` for `k = 0`.
pub fn pairing_span(n: usize, k: usize) -> Vec<Vec<QSqrt2>> {
    let sig = Signature::lorentz(n);
    perfect_matchings(k)
        .into_iter()
        .map(|mt| {
            multi_indices(n, k)
                .map(|idx| {
                    let mut v = 1i64;
                    for &(a, b) in &mt {
                        if idx[a] != idx[b] {
                            return QSqrt2::ZERO;
                        }
                        v *= eps(&sig, idx[a]);
                    }
                    QSqrt2::from_integer(v)
                })
                .collect()
        })
        .collect()
}

/// The pairing span symmetrised under the shape's declared symmetries.
pub fn symmetrized_pairing_span(shape: &TensorShape) -> Vec<Vec<QSqrt2>> {
    pairing_span(shape.dim, shape.rank)
        .into_iter()
        .map(|v| CoefficientTensor { shape: shape.clone(), entries: v }.symmetrized().entries)
        .collect()
}
