//! Monte-Carlo invariance checks on solved bases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ClassificationReport, SlotKind, SlotReport};
use crate::curvature::{curvature, dgamma_sq, riemann_scalar};
use crate::exact_ring::{QSqrt2, Scalar};
use crate::jet::{
    invert_matrix, random_chart_change, random_ddg, random_matter_jet, sample_with_rng, transform_matter_jet,
    transform_metric_jet, transform_positions, ChartChange3, MatterJet1, MetricJet2, SampleMode, SampleScalar,
    Signature,
};
use crate::solver::express_in_span;
use crate::symmetry::generators;
use crate::tensor::DenseArray;

/// Relative residuals divide by `max(|a|, |b|, RESIDUAL_FLOOR)`, so values that
/// should both vanish do not blow up.
const RESIDUAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericSummary {
    pub trials: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub exact: bool,
}

/// Scalars the suite can run in: exact Lorentz matrices come from products of
/// the discrete generators, float ones from a random boost and rotation.
pub trait SuiteScalar: SampleScalar {
    fn random_lorentz<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<Self>;
}

impl SuiteScalar for QSqrt2 {
    fn random_lorentz<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<Self> {
        let gens = generators(n);
        let mut m = identity(n);
        for _ in 0..4 {
            let g = &gens[rng.random_range(0..gens.len())];
            let g = if rng.random_bool(0.5) { g.inverse() } else { g.clone() };
            let a = DenseArray::from_fn(n, 2, |ix| g.matrix[ix[0]][ix[1]].clone());
            m = matmul(&m, &a);
        }
        m
    }
}

impl SuiteScalar for f64 {
    fn random_lorentz<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<Self> {
        let k = rng.random_range(1..n);
        let phi: f64 = rng.random_range(-1.0..=1.0);
        let mut boost = identity::<f64>(n);
        boost[[0, 0]] = phi.cosh();
        boost[[k, k]] = phi.cosh();
        boost[[0, k]] = phi.sinh();
        boost[[k, 0]] = phi.sinh();
        if n < 3 {
            return boost;
        }
        let a = rng.random_range(1..n);
        let b = (a + rng.random_range(1..n - 1) - 1) % (n - 1) + 1;
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut rot = identity::<f64>(n);
        rot[[a, a]] = theta.cos();
        rot[[b, b]] = theta.cos();
        rot[[a, b]] = -theta.sin();
        rot[[b, a]] = theta.sin();
        matmul(&boost, &rot)
    }
}

/// A random η-orthogonal matrix.
pub fn random_lorentz<F: SuiteScalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseArray<F> {
    F::random_lorentz(n, rng)
}

fn identity<F: Scalar>(n: usize) -> DenseArray<F> {
    crate::jet::identity_matrix(n)
}

fn matmul<F: Scalar>(a: &DenseArray<F>, b: &DenseArray<F>) -> DenseArray<F> {
    let n = a.dim();
    DenseArray::from_fn(n, 2, |ix| {
        (0..n).fold(F::zero(), |acc, k| acc + a[[ix[0], k]].clone() * b[[k, ix[1]]].clone())
    })
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random chart change with a random Lorentz factor applied to its Jacobian.
fn boosted_chart_change<F: SuiteScalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> ChartChange3<F> {
    let ch = random_chart_change::<F, _>(n, rng);
    let lorentz = ChartChange3::linear(F::random_lorentz(n, rng));
    ch.compose(&lorentz).expect("dimensions agree")
}

fn scalar_residual<F: Scalar>(a: &F, b: &F) -> f64 {
    array_residual(std::slice::from_ref(a), std::slice::from_ref(b))
}

fn array_residual<F: Scalar>(a: &[F], b: &[F]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = RESIDUAL_FLOOR;
    let mut exact_mismatch = false;
    for (x, y) in a.iter().zip(b) {
        let d = x.clone() - y.clone();
        if F::EXACT && !d.is_zero() {
            exact_mismatch = true;
        }
        diff = diff.max(d.magnitude());
        scale = scale.max(x.magnitude()).max(y.magnitude());
    }
    let r = diff / scale;
    if F::EXACT && exact_mismatch {
        r.max(f64::MIN_POSITIVE)
    } else if F::EXACT {
        0.0
    } else {
        r
    }
}

fn dot<F: Scalar>(v: &[F], w: &[F]) -> F {
    v.iter().zip(w).fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}

/// `K^a_i K^b_j E^{ij}` with `K = J⁻¹`.
fn push_forward2<F: Scalar>(e: &DenseArray<F>, k: &DenseArray<F>) -> DenseArray<F> {
    let n = e.dim();
    DenseArray::from_fn(n, 2, |ix| {
        let mut s = F::zero();
        for i in 0..n {
            for j in 0..n {
                s = s + k[[ix[0], i]].clone() * k[[ix[1], j]].clone() * e[[i, j]].clone();
            }
        }
        s
    })
}

/// One basis vector prepared for evaluation: converted entries plus the
/// coefficients expressing it in the slot's reference span.
struct Prepared<F> {
    kind: SlotKind,
    shape_dim: usize,
    shape_rank: usize,
    v: Vec<F>,
    coeffs: Vec<F>,
}

fn prepare<F: Scalar>(slot: &SlotReport) -> Vec<Prepared<F>> {
    let checked = matches!(
        slot.kind,
        SlotKind::ScalarCurvature
            | SlotKind::TensorCurvature
            | SlotKind::TensorConstant
            | SlotKind::Dgamma
            | SlotKind::Divergence
            | SlotKind::Trace
            | SlotKind::QuadraticInD
    );
    if !checked {
        return Vec::new();
    }
    slot.basis
        .vectors
        .iter()
        .map(|v| {
            let coeffs = match slot.kind {
                SlotKind::Divergence | SlotKind::Trace | SlotKind::QuadraticInD => Vec::new(),
                // a vector outside the reference span gets no coefficients and fails below
                _ => express_in_span(v, &slot.reference).unwrap_or_default(),
            };
            Prepared {
                kind: slot.kind,
                shape_dim: slot.shape.dim,
                shape_rank: slot.shape.rank,
                v: v.iter().map(F::from_exact).collect(),
                coeffs: coeffs.iter().map(F::from_exact).collect(),
            }
        })
        .collect()
}

struct Trial<F> {
    jet: MetricJet2<F>,
    mjet: MatterJet1<F>,
    jet_t: MetricJet2<F>,
    mjet_t: MatterJet1<F>,
    k: DenseArray<F>,
    lorentz: DenseArray<F>,
}

fn draw_trial<F: SuiteScalar>(n: usize, m: usize, seed: u64, trial: usize) -> Trial<F> {
    let mut rng = trial_rng(seed, trial);
    let jet = MetricJet2::normal(&Signature::lorentz(n), random_ddg(n, &mut rng));
    let mjet = random_matter_jet(n, m, &mut rng);
    let ch = boosted_chart_change::<F, _>(n, &mut rng);
    let lorentz = F::random_lorentz(n, &mut rng);
    let jet_t = transform_metric_jet(&jet, &ch).expect("dimensions agree");
    let mjet_t = transform_matter_jet(&mjet, &ch).expect("dimensions agree");
    let k = invert_matrix(&ch.jac).expect("sampled Jacobians are invertible");
    Trial { jet, mjet, jet_t, mjet_t, k, lorentz }
}

fn evaluate<F: Scalar>(p: &Prepared<F>, t: &Trial<F>) -> f64 {
    let n = t.jet.dim();
    let missing = p.coeffs.is_empty()
        && matches!(p.kind, SlotKind::ScalarCurvature | SlotKind::TensorCurvature | SlotKind::TensorConstant | SlotKind::Dgamma);
    if missing {
        return f64::INFINITY;
    }
    match p.kind {
        SlotKind::ScalarCurvature => {
            let before = dot(&p.v, t.jet.ddg.as_slice());
            let after = p.coeffs[0].clone() * riemann_scalar(&t.jet_t).expect("metric stays invertible");
            scalar_residual(&before, &after)
        }
        SlotKind::TensorCurvature => {
            let block = n.pow(4);
            let e = DenseArray::from_fn(n, 2, |ix| {
                let f = (ix[0] * n + ix[1]) * block;
                dot(&p.v[f..f + block], t.jet.ddg.as_slice())
            });
            let predicted = push_forward2(&e, &t.k);
            let cd = curvature(&t.jet_t).expect("metric stays invertible");
            let g_inv = invert_matrix(&t.jet_t.g).expect("metric stays invertible");
            let computed = DenseArray::from_fn(n, 2, |ix| {
                p.coeffs[0].clone() * cd.ricci_up[[ix[0], ix[1]]].clone()
                    + p.coeffs[1].clone() * cd.scalar.clone() * g_inv[[ix[0], ix[1]]].clone()
            });
            array_residual(predicted.as_slice(), computed.as_slice())
        }
        SlotKind::TensorConstant => {
            let b = DenseArray::from_vec(n, 2, p.v.clone()).expect("rank-2 vector");
            let predicted = push_forward2(&b, &t.k);
            let g_inv = invert_matrix(&t.jet_t.g).expect("metric stays invertible");
            let computed = g_inv.map(|x| p.coeffs[0].clone() * x.clone());
            array_residual(predicted.as_slice(), computed.as_slice())
        }
        SlotKind::Dgamma => {
            let dd = t.mjet.dd.as_slice();
            let block = dd.len();
            let before = p
                .v
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .fold(F::zero(), |acc, (f, x)| acc + x.clone() * dd[f / block].clone() * dd[f % block].clone());
            let after = p.coeffs[0].clone() * dgamma_sq(&t.jet_t, &t.mjet_t).expect("metric stays invertible");
            scalar_residual(&before, &after)
        }
        SlotKind::Divergence | SlotKind::Trace | SlotKind::QuadraticInD => {
            let v = DenseArray::from_vec(p.shape_dim, p.shape_rank, p.v.clone()).expect("shape matches");
            let moved = (0..p.shape_rank).fold(v.clone(), |acc, pos| transform_positions(&acc, pos, &t.lorentz));
            array_residual(v.as_slice(), moved.as_slice())
        }
        _ => 0.0,
    }
}

fn run_suite<F: SuiteScalar>(report: &ClassificationReport, trials: usize, seed: u64, tol: f64) -> NumericSummary {
    let prepared: Vec<Prepared<F>> = report.slots.iter().flat_map(prepare::<F>).collect();
    let n = report.n;
    let m = report.m.unwrap_or(1);
    let max_residual = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let t = draw_trial::<F>(n, m, seed, trial);
            prepared.iter().map(|p| evaluate(p, &t)).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    NumericSummary { trials, max_residual, tol, pass: max_residual <= tol, exact: F::EXACT }
}

/// Float-mode invariance check of every solved basis vector; records the summary on the report.
pub fn numeric_invariance_suite(mut report: ClassificationReport, trials: usize, seed: u64, tol: f64) -> ClassificationReport {
    report.numeric = Some(run_suite::<f64>(&report, trials, seed, tol));
    report
}

/// Exact-mode variant: passes only when every residual is exactly zero.
pub fn numeric_invariance_suite_exact(mut report: ClassificationReport, trials: usize, seed: u64) -> ClassificationReport {
    report.numeric = Some(run_suite::<QSqrt2>(&report, trials, seed, 0.0));
    report
}

/// `R` before and after a random boosted chart change on random metric jets.
pub fn riemann_invariance_trials<F: SuiteScalar>(
    n: usize,
    trials: usize,
    seed: u64,
    mode: SampleMode,
    tol: f64,
) -> NumericSummary {
    let max_residual = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let (jet, _, _) = sample_with_rng::<F, _>(n, 1, mode, &mut rng);
            let ch = boosted_chart_change::<F, _>(n, &mut rng);
            let jet_t = transform_metric_jet(&jet, &ch).expect("dimensions agree");
            let before = riemann_scalar(&jet).expect("sampled metrics are invertible");
            let after = riemann_scalar(&jet_t).expect("metric stays invertible");
            scalar_residual(&before, &after)
        })
        .reduce(|| 0.0, f64::max);
    NumericSummary { trials, max_residual, tol, pass: max_residual <= tol, exact: F::EXACT }
}
