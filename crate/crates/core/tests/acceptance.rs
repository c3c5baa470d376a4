use std::time::Instant;

use lagrangian_core::classifier::{
    classify_einstein_tensor, classify_matter, classify_scalar, einstein_problems, matter_problems,
    reference_dgamma_coeffs, reference_tensor_coeffs, riemann_invariance_trials, scalar_problems,
    verify_bray_corollary, ClassificationReport, SlotKind, SlotProblem, SlotReport,
};
use lagrangian_core::curvature::ricci_up_normal;
use lagrangian_core::exact_ring::{QSqrt2, Rational};
use lagrangian_core::jet::{random_ddg, MetricJet2, SampleMode, Signature};
use lagrangian_core::solver::{nullspace, subspace_equal, Basis};
use lagrangian_core::symmetry::TensorShape;
use lagrangian_core::tensor::flatten;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SVD_CUTOFF: f64 = 1e-9;
const ORACLE_MAX_COLUMNS: usize = 512;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&what.into());
        }
    }
}

fn slot(r: &ClassificationReport, kind: SlotKind) -> &SlotReport {
    r.slot(kind).unwrap_or_else(|| panic!("missing slot {kind:?}"))
}

fn dim(r: &ClassificationReport, kind: SlotKind) -> Option<usize> {
    slot(r, kind).dimension
}

/// Null dimension from singular values of the dense float matrix.
fn svd_null_dim(p: &SlotProblem) -> usize {
    let ncols = p.shape.ncols();
    let rows = &p.system.rows;
    if rows.is_empty() {
        return ncols;
    }
    let mut m = DMatrix::<f64>::zeros(rows.len().max(ncols), ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row {
            m[(r, *c)] = v.to_f64();
        }
    }
    let sv = m.singular_values();
    let scale = sv.max().max(1.0);
    ncols - sv.iter().filter(|s| **s > SVD_CUTOFF * scale).count()
}

/// `v` changes sign under each adjacent swap of positions in `start..start + len`.
fn antisymmetric_in(v: &[QSqrt2], n: usize, rank: usize, start: usize, len: usize) -> bool {
    let shape = TensorShape::plain(n, rank);
    (0..shape.ncols()).all(|f| {
        let idx = lagrangian_core::tensor::unflatten(n, rank, f);
        (start..start + len - 1).all(|p| {
            let mut sw = idx.clone();
            sw.swap(p, p + 1);
            v[flatten(n, &sw)] == -&v[f]
        })
    })
}

fn criterion_1(scalar: &[ClassificationReport]) -> Outcome {
    let mut o = Outcome::new();
    for r in scalar.iter().filter(|r| r.n <= 4) {
        let c = slot(r, SlotKind::ScalarCurvature);
        o.check(c.dimension == Some(1), format!("n={} curvature dim {:?}", r.n, c.dimension));
        o.check(c.span_match == Some(true), format!("n={} curvature span mismatch", r.n));
        o.check(dim(r, SlotKind::Constant) == Some(1), format!("n={} constant dim", r.n));
    }
    o
}

fn criterion_2(scalar: &[ClassificationReport]) -> Outcome {
    let mut o = Outcome::new();
    for r in scalar.iter().filter(|r| r.n <= 4) {
        let d = dim(r, SlotKind::SecondDerivQuadratic);
        o.check(d == Some(0), format!("n={} rank-8 nullspace dim {:?}", r.n, d));
    }
    o
}

fn criterion_3(tensor: &[ClassificationReport]) -> Outcome {
    let mut o = Outcome::new();
    for r in tensor {
        let n = r.n;
        let six = slot(r, SlotKind::TensorCurvature);
        let two = slot(r, SlotKind::TensorConstant);
        let refs = reference_tensor_coeffs(n);
        let span = Basis::new(six.columns, vec![refs.ric.entries.clone(), refs.rg.entries.clone()]);
        o.check(subspace_equal(&six.basis, &span), format!("n={n} rank-6 span differs from {{ric, rg}}"));
        o.check(six.dimension == Some(2), format!("n={n} rank-6 dim {:?}, criterion states 2", six.dimension));
        o.check(two.dimension == Some(1) && two.span_match == Some(true), format!("n={n} rank-2 slot"));
        if n == 2 {
            // Ric = R g / 2: check 2·ric − rg contracts to zero on random normal jets
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let diff: Vec<QSqrt2> = refs
                .ric
                .entries
                .iter()
                .zip(&refs.rg.entries)
                .map(|(a, b)| &a.scale(&Rational::from_integer(2)) - b)
                .collect();
            let sig = Signature::lorentz(2);
            let degenerate = (0..50).all(|_| {
                let jet = MetricJet2::<QSqrt2>::normal(&sig, random_ddg(2, &mut rng));
                ricci_up_normal(&jet).is_ok()
                    && diff.chunks(16).all(|c| {
                        c.iter().zip(jet.ddg.as_slice()).fold(QSqrt2::ZERO, |s, (x, y)| &s + &(x * y)).is_zero()
                    })
            });
            o.check(degenerate, "n=2 degeneracy 2·ric − rg ≠ 0 on some jet");
        }
    }
    o
}

fn criterion_4(matter: &[ClassificationReport]) -> Outcome {
    let mut o = Outcome::new();
    for r in matter {
        let (n, m) = (r.n, r.m.unwrap());
        let dg = slot(r, SlotKind::Dgamma);
        let expected = if m < n { 1 } else { 0 };
        o.check(dg.dimension == Some(expected), format!("({n},{m}) dgamma dim {:?}", dg.dimension));
        if expected == 1 {
            let reference = Basis::new(dg.columns, vec![reference_dgamma_coeffs(n, m).entries]);
            o.check(subspace_equal(&dg.basis, &reference), format!("({n},{m}) dgamma span"));
            for v in &dg.basis.vectors {
                let rank = 2 * (m + 1);
                o.check(antisymmetric_in(v, n, rank, 0, m + 1), format!("({n},{m}) first block not alternating"));
                o.check(antisymmetric_in(v, n, rank, m + 1, m + 1), format!("({n},{m}) last block not alternating"));
            }
        }
        let mixed = dim(r, SlotKind::MixedSecondDeriv);
        o.check(mixed == Some(0), format!("({n},{m}) mixed dim {mixed:?}"));
    }
    o
}

fn criterion_5(bray: &[ClassificationReport], control: &ClassificationReport) -> Outcome {
    let mut o = Outcome::new();
    for r in bray {
        let d = dim(r, SlotKind::Trace);
        o.check(d == Some(0), format!("n={} m=3 trace dim {d:?}", r.n));
        o.check(r.provenance.iter().any(|p| p == "parity"), format!("n={} no parity rows", r.n));
    }
    let d = dim(control, SlotKind::Trace);
    o.check(d == Some(1), format!("control m=2 trace dim {d:?}"));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let float = riemann_invariance_trials::<f64>(4, 100, 0, SampleMode::Generic, 1e-8);
    o.check(float.pass, format!("float max residual {:e}", float.max_residual));
    let exact = riemann_invariance_trials::<QSqrt2>(4, 10, 0, SampleMode::Generic, 0.0);
    o.check(exact.max_residual == 0.0, format!("exact residual {:e}", exact.max_residual));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 30.0, format!("took {secs:.1}s"));
    o
}

fn criterion_7(problems: &[SlotProblem]) -> Outcome {
    let mut o = Outcome::new();
    let mut checked = 0;
    for p in problems.iter().filter(|p| p.shape.ncols() <= ORACLE_MAX_COLUMNS) {
        let exact = nullspace(&p.system).dim();
        let float = svd_null_dim(p);
        o.check(exact == float, format!("{:?} n={} rank {}: exact {exact} vs svd {float}", p.kind, p.shape.dim, p.shape.rank));
        checked += 1;
    }
    o.check(checked > 0, "no systems checked");
    if o.pass {
        o.detail = format!("{checked} systems");
    }
    o
}

fn criterion_8(scalar: &[ClassificationReport]) -> Outcome {
    let mut o = Outcome::new();
    let minus_two = Rational::from_integer(-2);
    for r in scalar {
        let n = r.n;
        for v in &slot(r, SlotKind::ScalarCurvature).basis.vectors {
            let a = |i: usize, j: usize, k: usize, l: usize| &v[flatten(n, &[i, j, k, l])];
            for i in 0..n {
                for j in 0..n {
                    o.check(a(i, j, j, j).is_zero(), format!("n={n} a^{{{i}{j}{j}{j}}} ≠ 0"));
                    o.check(*a(i, i, j, j) == a(i, j, i, j).scale(&minus_two), format!("n={n} a^{{{i}{i}{j}{j}}}"));
                }
            }
        }
    }
    o
}

fn report(id: usize, name: &str, o: &Outcome, secs: f64) -> bool {
    let status = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{name}] {status} ({secs:.2}s) {}", o.detail);
    o.pass
}

#[test]
fn acceptance() {
    let t = Instant::now();
    let scalar: Vec<ClassificationReport> = (2..=4).map(|n| classify_scalar(n).unwrap()).collect();
    let scalar_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let tensor: Vec<ClassificationReport> = (2..=4).map(|n| classify_einstein_tensor(n).unwrap()).collect();
    let tensor_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let matter: Vec<ClassificationReport> =
        [(4, 1), (4, 2), (4, 3), (3, 3)].iter().map(|&(n, m)| classify_matter(n, m).unwrap()).collect();
    let matter_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let bray: Vec<ClassificationReport> = [3, 4].iter().map(|&n| verify_bray_corollary(n).unwrap()).collect();
    let control = classify_matter(4, 2).unwrap();
    let bray_secs = t.elapsed().as_secs_f64();

    let mut small: Vec<SlotProblem> = Vec::new();
    for n in 2..=4 {
        small.extend(scalar_problems(n).into_iter().filter(|p| p.shape.ncols() <= ORACLE_MAX_COLUMNS));
        small.extend(einstein_problems(n).into_iter().filter(|p| p.shape.ncols() <= ORACLE_MAX_COLUMNS));
    }
    for (n, m) in [(4, 1), (4, 2), (4, 3), (3, 3)] {
        small.extend(matter_problems(n, m, false).into_iter().filter(|p| p.shape.ncols() <= ORACLE_MAX_COLUMNS));
    }

    let results = [
        report(1, "scalar classification", &criterion_1(&scalar), scalar_secs),
        report(2, "rank-8 vanishing", &criterion_2(&scalar), scalar_secs),
        report(3, "einstein-type tensor", &criterion_3(&tensor), tensor_secs),
        report(4, "matter classification", &criterion_4(&matter), matter_secs),
        report(5, "bray corollary", &criterion_5(&bray, &control), bray_secs),
        {
            let t = Instant::now();
            let o = criterion_6();
            report(6, "numeric invariance", &o, t.elapsed().as_secs_f64())
        },
        {
            let t = Instant::now();
            let o = criterion_7(&small);
            report(7, "dual oracle", &o, t.elapsed().as_secs_f64())
        },
        report(8, "structural identities", &criterion_8(&scalar), 0.0),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
