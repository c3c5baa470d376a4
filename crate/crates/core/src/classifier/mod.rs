//! Theorem runs: assemble each slot's constraint system, solve it exactly and
//! compare the solution space with the known invariants.

mod numeric;
mod reference;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::exact_ring::QSqrt2;
use crate::solver::{nullspace, rank, subspace_equal, verify_basis, Basis, SolverError};
use crate::symmetry::{
    gen_all_group_constraints, gen_cubic_change_constraints_on, gen_matter_mixing_constraints, gen_pair_sym,
    gen_parity_constraints, gen_quadratic_change_constraints_on, ConstraintSystem, GeneratorKind, TensorShape,
};

pub use numeric::{
    numeric_invariance_suite, numeric_invariance_suite_exact, random_lorentz, riemann_invariance_trials,
    NumericSummary, SuiteScalar,
};
pub use reference::{
    pairing_span, perfect_matchings, reference_dgamma_coeffs, reference_scalar_coeffs, reference_tensor_coeffs,
    symmetrized_pairing_span, TensorReference,
};

/// Systems wider than this are skipped unless heavy runs are allowed.
pub const HEAVY_COLUMNS: usize = 65_536;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("dimension {n} outside the supported range {min}..={max} for {theorem}")]
    UnsupportedDimension { theorem: Theorem, n: usize, min: usize, max: usize },
    #[error("matter rank {m} unsupported at dimension {n}")]
    UnsupportedMatterRank { n: usize, m: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    Scalar,
    EinsteinTensor,
    Matter,
    BrayCorollary,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::Scalar => "scalar",
            Theorem::EinsteinTensor => "einstein-tensor",
            Theorem::Matter => "matter",
            Theorem::BrayCorollary => "bray-corollary",
        })
    }
}

/// Which coefficient tensor a slot holds; fixes how the numeric suite checks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotKind {
    /// Rank-0 constant term.
    Constant,
    /// `a^{ijkl}` against `R`.
    ScalarCurvature,
    /// Rank-8 `γ^{ijklqrst}`.
    SecondDerivQuadratic,
    /// Rank-6 `a^{ijklmp}` against `Ric^{ij}` and `R g^{ij}`.
    TensorCurvature,
    /// Rank-2 `b^{ij}` against `g^{ij}`.
    TensorConstant,
    Dgamma,
    Divergence,
    Trace,
    QuadraticInD,
    MixedSecondDeriv,
}

impl SlotKind {
    pub fn name(self) -> &'static str {
        match self {
            SlotKind::Constant | SlotKind::TensorConstant => "constant",
            SlotKind::ScalarCurvature | SlotKind::TensorCurvature => "curvature",
            SlotKind::SecondDerivQuadratic => "second-deriv-quadratic",
            SlotKind::Dgamma => "dgamma",
            SlotKind::Divergence => "divergence",
            SlotKind::Trace => "trace",
            SlotKind::QuadraticInD => "quadratic-in-D",
            SlotKind::MixedSecondDeriv => "mixed-second-deriv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotStatus {
    Pass,
    Fail,
    /// Solved space is larger than the enumerated invariants; reported, not failed.
    Flagged,
    /// Not solved because the system is heavy and heavy runs were not allowed.
    Skipped,
}

/// How a slot's solution is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// Must equal the reference span.
    Exact,
    /// The reference comes from enumerating η-pairings; a strictly larger solution is flagged.
    Enumerated,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotReport {
    pub name: &'static str,
    pub kind: SlotKind,
    pub rank: usize,
    pub columns: usize,
    pub constraint_rows: usize,
    pub dimension: Option<usize>,
    pub expected_dimension: usize,
    pub span_match: Option<bool>,
    pub target: Target,
    pub status: SlotStatus,
    #[serde(serialize_with = "serialize_basis")]
    pub basis: Basis,
    pub families: Vec<String>,
    #[serde(skip)]
    pub shape: TensorShape,
    #[serde(skip)]
    pub reference: Vec<Vec<QSqrt2>>,
}

fn serialize_basis<S: Serializer>(b: &Basis, s: S) -> Result<S::Ok, S::Error> {
    let rendered: Vec<Vec<String>> = b.vectors.iter().map(|v| v.iter().map(|x| x.to_string()).collect()).collect();
    rendered.serialize(s)
}

impl SlotReport {
    pub fn passed(&self) -> bool {
        matches!(self.status, SlotStatus::Pass | SlotStatus::Flagged)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub theorem: Theorem,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub slots: Vec<SlotReport>,
    pub numeric: Option<NumericSummary>,
    pub provenance: Vec<String>,
}

impl ClassificationReport {
    fn new(theorem: Theorem, n: usize, m: Option<usize>, slots: Vec<SlotReport>) -> Self {
        let provenance: BTreeSet<String> = slots.iter().flat_map(|s| s.families.iter().cloned()).collect();
        ClassificationReport { theorem, n, m, slots, numeric: None, provenance: provenance.into_iter().collect() }
    }

    pub fn slot(&self, kind: SlotKind) -> Option<&SlotReport> {
        self.slots.iter().find(|s| s.kind == kind)
    }

    /// Every slot passed (or was flagged) and the numeric suite, if run, passed.
    /// Skipped slots count as failures.
    pub fn passed(&self) -> bool {
        self.slots.iter().all(SlotReport::passed) && self.numeric.as_ref().is_none_or(|s| s.pass)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifyOptions {
    pub allow_heavy: bool,
}

/// A slot's shape, constraint system and reference span, before solving.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    pub kind: SlotKind,
    pub shape: TensorShape,
    pub system: ConstraintSystem,
    pub reference: Vec<Vec<QSqrt2>>,
    pub target: Target,
}

impl SlotProblem {
    fn new(kind: SlotKind, shape: TensorShape, system: ConstraintSystem, reference: Vec<Vec<QSqrt2>>, target: Target) -> Self {
        SlotProblem { kind, shape, system, reference, target }
    }

    pub fn solve(self, opts: &ClassifyOptions) -> Result<SlotReport, ClassifyError> {
        let ncols = self.shape.ncols();
        let expected = rank(&self.reference, ncols);
        let mut report = SlotReport {
            name: self.kind.name(),
            kind: self.kind,
            rank: self.shape.rank,
            columns: ncols,
            constraint_rows: self.system.len(),
            dimension: None,
            expected_dimension: expected,
            span_match: None,
            target: self.target,
            status: SlotStatus::Skipped,
            basis: Basis::empty(ncols),
            families: self.system.families(),
            shape: self.shape,
            reference: self.reference,
        };
        if ncols > HEAVY_COLUMNS && !opts.allow_heavy {
            return Ok(report);
        }
        let basis = nullspace(&self.system);
        verify_basis(&self.system, &basis)?;
        let reference = Basis::new(ncols, report.reference.clone());
        let span_match = subspace_equal(&basis, &reference);
        report.status = if span_match {
            SlotStatus::Pass
        } else if self.target == Target::Enumerated && basis.dim() > expected && reference_inside(&reference, &basis) {
            SlotStatus::Flagged
        } else {
            SlotStatus::Fail
        };
        report.dimension = Some(basis.dim());
        report.span_match = Some(span_match);
        report.basis = basis;
        Ok(report)
    }
}

fn reference_inside(reference: &Basis, basis: &Basis) -> bool {
    let mut joined = basis.vectors.clone();
    joined.extend(reference.vectors.iter().cloned());
    rank(&joined, basis.ncols) == basis.dim()
}

/// Whether a run builds a system wider than [`HEAVY_COLUMNS`].
pub fn requires_heavy(theorem: Theorem, n: usize, m: Option<usize>) -> bool {
    let m = m.unwrap_or(3);
    let widths = match theorem {
        Theorem::Scalar => vec![TensorShape::gamma8(n).ncols()],
        Theorem::EinsteinTensor => vec![TensorShape::einstein6(n).ncols()],
        Theorem::Matter | Theorem::BrayCorollary => vec![
            TensorShape::matter_eta(n, m).ncols(),
            TensorShape::quadratic_in_d(n, m).ncols(),
            TensorShape::mixed_second_deriv(n, m).ncols(),
        ],
    };
    widths.into_iter().any(|w| w > HEAVY_COLUMNS)
}

fn check_range(theorem: Theorem, n: usize, min: usize, max: usize) -> Result<(), ClassifyError> {
    if n < min || n > max {
        return Err(ClassifyError::UnsupportedDimension { theorem, n, min, max });
    }
    Ok(())
}

fn parity_sign(rank: usize) -> i32 {
    if rank.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn combined(parts: impl IntoIterator<Item = ConstraintSystem>, ncols: usize) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new(ncols);
    for p in parts {
        sys.extend(p);
    }
    sys
}

/// `{pair-sym, cubic change, group}` on `a^{ijkl}`, optionally without the boost.
pub fn scalar_curvature_system(n: usize, with_boost: bool) -> ConstraintSystem {
    let shape = TensorShape::weyl4(n);
    let mut sys = combined([gen_pair_sym(&shape), gen_cubic_change_constraints_on(&shape, 0)], shape.ncols());
    for g in crate::symmetry::generators(n) {
        if with_boost || g.kind != GeneratorKind::Boost {
            sys.extend(crate::symmetry::gen_group_constraints(&shape, &g));
        }
    }
    sys
}

pub fn scalar_problems(n: usize) -> Vec<SlotProblem> {
    let constant = TensorShape::plain(n, 0);
    let weyl = TensorShape::weyl4(n);
    let gamma = TensorShape::gamma8(n);
    let gamma_sys = if gamma.ncols() > HEAVY_COLUMNS {
        // built lazily in `classify_scalar_with` when heavy runs are allowed
        ConstraintSystem::new(gamma.ncols())
    } else {
        gamma_system(&gamma)
    };
    vec![
        SlotProblem::new(
            SlotKind::Constant,
            constant.clone(),
            gen_all_group_constraints(&constant),
            pairing_span(n, 0),
            Target::Exact,
        ),
        SlotProblem::new(
            SlotKind::ScalarCurvature,
            weyl,
            scalar_curvature_system(n, true),
            vec![reference_scalar_coeffs(n).entries],
            Target::Exact,
        ),
        SlotProblem::new(SlotKind::SecondDerivQuadratic, gamma, gamma_sys, Vec::new(), Target::Exact),
    ]
}

fn gamma_system(shape: &TensorShape) -> ConstraintSystem {
    combined(
        [gen_pair_sym(shape), gen_quadratic_change_constraints_on(shape, 4), gen_all_group_constraints(shape)],
        shape.ncols(),
    )
}

pub fn classify_scalar(n: usize) -> Result<ClassificationReport, ClassifyError> {
    classify_scalar_with(n, &ClassifyOptions::default())
}

pub fn classify_scalar_with(n: usize, opts: &ClassifyOptions) -> Result<ClassificationReport, ClassifyError> {
    check_range(Theorem::Scalar, n, 2, 5)?;
    let mut problems = scalar_problems(n);
    if opts.allow_heavy {
        for p in problems.iter_mut().filter(|p| p.kind == SlotKind::SecondDerivQuadratic && p.system.is_empty()) {
            p.system = gamma_system(&p.shape);
        }
    }
    let slots = solve_all(problems, opts)?;
    Ok(ClassificationReport::new(Theorem::Scalar, n, None, slots))
}

pub fn einstein_problems(n: usize) -> Vec<SlotProblem> {
    let six = TensorShape::einstein6(n);
    let two = TensorShape::symmetric2(n);
    let reference = reference_tensor_coeffs(n);
    vec![
        SlotProblem::new(
            SlotKind::TensorCurvature,
            six.clone(),
            combined(
                [gen_pair_sym(&six), gen_cubic_change_constraints_on(&six, 2), gen_all_group_constraints(&six)],
                six.ncols(),
            ),
            vec![reference.ric.entries, reference.rg.entries],
            Target::Exact,
        ),
        SlotProblem::new(
            SlotKind::TensorConstant,
            two.clone(),
            combined([gen_pair_sym(&two), gen_all_group_constraints(&two)], two.ncols()),
            vec![reference.g.entries],
            Target::Exact,
        ),
    ]
}

pub fn classify_einstein_tensor(n: usize) -> Result<ClassificationReport, ClassifyError> {
    check_range(Theorem::EinsteinTensor, n, 2, 4)?;
    let slots = solve_all(einstein_problems(n), &ClassifyOptions::default())?;
    Ok(ClassificationReport::new(Theorem::EinsteinTensor, n, None, slots))
}

/// The five matter slots. Systems wider than [`HEAVY_COLUMNS`] are left empty
/// unless `build_heavy` is set.
pub fn matter_problems(n: usize, m: usize, build_heavy: bool) -> Vec<SlotProblem> {
    let build = |shape: &TensorShape, f: &dyn Fn(&TensorShape) -> ConstraintSystem| {
        if shape.ncols() > HEAVY_COLUMNS && !build_heavy {
            ConstraintSystem::new(shape.ncols())
        } else {
            f(shape)
        }
    };

    let eta = TensorShape::matter_eta(n, m);
    let dgamma_ref = reference_dgamma_coeffs(n, m);
    let dgamma_ref = if dgamma_ref.is_zero() { Vec::new() } else { vec![dgamma_ref.entries] };
    let eta_sys = build(&eta, &|s| {
        combined([gen_pair_sym(s), gen_matter_mixing_constraints(n, m), gen_all_group_constraints(s)], s.ncols())
    });

    let div = TensorShape::plain(n, m + 1);
    let div_sys = combined(
        [gen_all_group_constraints(&div), gen_parity_constraints(&div, parity_sign(m + 1))],
        div.ncols(),
    );

    let trace = TensorShape::plain(n, m);
    let trace_sys = combined(
        [gen_all_group_constraints(&trace), gen_parity_constraints(&trace, parity_sign(m))],
        trace.ncols(),
    );

    let quad = TensorShape::quadratic_in_d(n, m);
    let quad_sys = build(&quad, &|s| combined([gen_pair_sym(s), gen_all_group_constraints(s)], s.ncols()));

    let mixed = TensorShape::mixed_second_deriv(n, m);
    let mixed_sys = build(&mixed, &|s| {
        combined(
            [
                gen_pair_sym(s),
                gen_quadratic_change_constraints_on(s, m + 1),
                gen_parity_constraints(s, parity_sign(m + 1)),
            ],
            s.ncols(),
        )
    });

    vec![
        SlotProblem::new(SlotKind::Dgamma, eta, eta_sys, dgamma_ref, Target::Exact),
        SlotProblem::new(SlotKind::Divergence, div, div_sys, pairing_span(n, m + 1), Target::Enumerated),
        SlotProblem::new(SlotKind::Trace, trace, trace_sys, pairing_span(n, m), Target::Enumerated),
        SlotProblem::new(SlotKind::QuadraticInD, quad.clone(), quad_sys, symmetrized_pairing_span(&quad), Target::Enumerated),
        SlotProblem::new(SlotKind::MixedSecondDeriv, mixed, mixed_sys, Vec::new(), Target::Exact),
    ]
}

pub fn classify_matter(n: usize, m: usize) -> Result<ClassificationReport, ClassifyError> {
    classify_matter_with(n, m, &ClassifyOptions::default())
}

pub fn classify_matter_with(n: usize, m: usize, opts: &ClassifyOptions) -> Result<ClassificationReport, ClassifyError> {
    check_range(Theorem::Matter, n, 2, 4)?;
    if m < 1 || m > n {
        return Err(ClassifyError::UnsupportedMatterRank { n, m });
    }
    let slots = solve_all(matter_problems(n, m, opts.allow_heavy), opts)?;
    Ok(ClassificationReport::new(Theorem::Matter, n, Some(m), slots))
}

/// Matter classification at `m = 3`; the trace slot must vanish.
pub fn verify_bray_corollary(n: usize) -> Result<ClassificationReport, ClassifyError> {
    verify_bray_corollary_with(n, &ClassifyOptions::default())
}

pub fn verify_bray_corollary_with(n: usize, opts: &ClassifyOptions) -> Result<ClassificationReport, ClassifyError> {
    check_range(Theorem::BrayCorollary, n, 3, 4)?;
    let mut report = classify_matter_with(n, 3, opts)?;
    report.theorem = Theorem::BrayCorollary;
    if let Some(trace) = report.slots.iter_mut().find(|s| s.kind == SlotKind::Trace) {
        // the corollary asserts vanishing, so a larger space is a failure here
        trace.target = Target::Exact;
        if trace.dimension != Some(0) {
            trace.status = SlotStatus::Fail;
        }
    }
    Ok(report)
}

fn solve_all(problems: Vec<SlotProblem>, opts: &ClassifyOptions) -> Result<Vec<SlotReport>, ClassifyError> {
    use rayon::prelude::*;
    problems.into_par_iter().map(|p| p.solve(opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::scalar_normal;
    use crate::jet::{random_ddg, MetricJet2, Signature};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_small_dims() {
        for n in [2, 3] {
            let r = classify_scalar(n).unwrap();
            assert!(r.passed(), "n={n}");
            assert_eq!(r.slot(SlotKind::Constant).unwrap().dimension, Some(1));
            assert_eq!(r.slot(SlotKind::ScalarCurvature).unwrap().dimension, Some(1));
            assert_eq!(r.slot(SlotKind::SecondDerivQuadratic).unwrap().dimension, Some(0));
            for tag in ["pair-sym", "cubic-change", "quadratic-change", "group:boost"] {
                assert!(r.provenance.iter().any(|p| p == tag), "{tag}");
            }
        }
    }

    #[test]
    fn scalar_basis_identities() {
        let r = classify_scalar(4).unwrap();
        let slot = r.slot(SlotKind::ScalarCurvature).unwrap();
        let n = 4;
        for v in &slot.basis.vectors {
            let a = |i: usize, j: usize, k: usize, l: usize| &v[((i * n + j) * n + k) * n + l];
            for i in 0..n {
                for j in 0..n {
                    assert!(a(i, j, j, j).is_zero());
                    assert_eq!(*a(i, i, j, j), a(i, j, i, j).scale(&crate::exact_ring::Rational::from_integer(-2)));
                }
            }
        }
    }

    #[test]
    fn scalar_basis_is_a_multiple_of_curvature() {
        let r = classify_scalar(3).unwrap();
        let v = &r.slot(SlotKind::ScalarCurvature).unwrap().basis.vectors[0];
        let sig = Signature::lorentz(3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let jets: Vec<MetricJet2<QSqrt2>> = (0..50).map(|_| MetricJet2::normal(&sig, random_ddg(3, &mut rng))).collect();
        let contract = |j: &MetricJet2<QSqrt2>| {
            v.iter().zip(j.ddg.as_slice()).fold(QSqrt2::ZERO, |acc, (x, y)| &acc + &(x * y))
        };
        // fit (c1, c0) on the first two jets with distinct R, verify on the rest
        let (j0, j1) = (&jets[0], jets.iter().skip(1).find(|j| scalar_normal(j).unwrap() != scalar_normal(&jets[0]).unwrap()).unwrap());
        let (r0, r1) = (scalar_normal(j0).unwrap(), scalar_normal(j1).unwrap());
        let c1 = (contract(j1) - contract(j0)).checked_div(&(&r1 - &r0)).unwrap();
        let c0 = contract(j0) - &c1 * &r0;
        assert!(c0.is_zero());
        for j in &jets {
            assert_eq!(contract(j), &(&c1 * &scalar_normal(j).unwrap()) + &c0);
        }
    }

    #[test]
    fn boost_does_work() {
        for n in [3, 4] {
            let with = nullspace(&scalar_curvature_system(n, true)).dim();
            let without = nullspace(&scalar_curvature_system(n, false)).dim();
            assert!(without > with, "n={n}: {without} vs {with}");
        }
    }

    #[test]
    fn einstein_small_dims() {
        let r = classify_einstein_tensor(3).unwrap();
        assert!(r.passed());
        assert_eq!(r.slot(SlotKind::TensorCurvature).unwrap().dimension, Some(2));
        assert_eq!(r.slot(SlotKind::TensorConstant).unwrap().dimension, Some(1));

        // ric and rg are proportional in two dimensions
        let r = classify_einstein_tensor(2).unwrap();
        let slot = r.slot(SlotKind::TensorCurvature).unwrap();
        assert_eq!(slot.span_match, Some(true));
        assert_eq!(slot.expected_dimension, 1);
    }

    #[test]
    fn matter_small_dims() {
        let r = classify_matter(3, 2).unwrap();
        assert!(r.passed(), "{:?}", r.slots.iter().map(|s| (s.name, s.dimension, s.status)).collect::<Vec<_>>());
        assert_eq!(r.slot(SlotKind::Dgamma).unwrap().dimension, Some(1));
        assert_eq!(r.slot(SlotKind::Trace).unwrap().dimension, Some(1));
        assert_eq!(r.slot(SlotKind::MixedSecondDeriv).unwrap().dimension, Some(0));
        assert!(r.provenance.iter().any(|p| p == "matter-mixing"));

        let r = classify_matter(3, 3).unwrap();
        assert_eq!(r.slot(SlotKind::Dgamma).unwrap().dimension, Some(0));
        assert_eq!(r.slot(SlotKind::Trace).unwrap().dimension, Some(0));
    }

    #[test]
    fn bray_at_three() {
        let r = verify_bray_corollary(3).unwrap();
        assert_eq!(r.theorem, Theorem::BrayCorollary);
        assert_eq!(r.slot(SlotKind::Trace).unwrap().dimension, Some(0));
        assert!(r.provenance.iter().any(|p| p == "parity"));
        assert!(r.passed());
    }

    #[test]
    fn range_errors() {
        assert!(matches!(classify_scalar(7), Err(ClassifyError::UnsupportedDimension { n: 7, .. })));
        assert!(matches!(classify_einstein_tensor(5), Err(ClassifyError::UnsupportedDimension { .. })));
        assert!(matches!(classify_matter(3, 4), Err(ClassifyError::UnsupportedMatterRank { .. })));
        assert!(matches!(verify_bray_corollary(2), Err(ClassifyError::UnsupportedDimension { .. })));
    }

    #[test]
    fn heavy_runs() {
        assert!(requires_heavy(Theorem::Scalar, 5, None));
        assert!(!requires_heavy(Theorem::Scalar, 4, None));
        assert!(requires_heavy(Theorem::Matter, 4, Some(4)));
        assert!(!requires_heavy(Theorem::Matter, 4, Some(3)));
        assert!(!requires_heavy(Theorem::BrayCorollary, 4, None));
    }

    #[test]
    fn heavy_slots_are_skipped() {
        let r = classify_matter(4, 4).unwrap();
        let slot = r.slot(SlotKind::MixedSecondDeriv).unwrap();
        assert_eq!(slot.status, SlotStatus::Skipped);
        assert_eq!(slot.dimension, None);
        assert!(!r.passed());
    }
}
