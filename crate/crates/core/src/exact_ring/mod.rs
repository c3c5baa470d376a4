//! Exact arithmetic over ℚ and ℚ(√2), plus the [`Scalar`] abstraction that
//! lets the jet and curvature code run either exactly or in `f64`.

mod qsqrt2;
mod rational;

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

pub use qsqrt2::QSqrt2;
pub use rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse exact value from {0:?}")]
    Parse(String),
}

/// `x · y` in ℚ(√2).
pub fn ring_mul(x: &QSqrt2, y: &QSqrt2) -> QSqrt2 {
    x * y
}

/// `x⁻¹` in ℚ(√2) via the conjugate `(a − b√2)/(a² − 2b²)`.
pub fn ring_inv(x: &QSqrt2) -> Result<QSqrt2, RingError> {
    x.inv()
}

/// Field element used by the jet, curvature and sampling code.
///
/// `QSqrt2` gives exact results; `f64` trades exactness for throughput in the
/// Monte-Carlo checks.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_exact(v: &QSqrt2) -> Self;
    fn to_f64(&self) -> f64;
    fn inv(&self) -> Result<Self, RingError>;
    /// Exactly zero in exact mode; `|x| ≤ 1e−12` in float mode.
    fn is_negligible(&self) -> bool;

    fn is_zero(&self) -> bool {
        self.to_f64() == 0.0 && self.is_negligible()
    }

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }

    fn half(&self) -> Self {
        self.clone() * Self::from_exact(&QSqrt2::from_rational(Rational::new(1, 2).unwrap()))
    }
}

impl Scalar for QSqrt2 {
    const EXACT: bool = true;

    fn zero() -> Self {
        QSqrt2::ZERO
    }
    fn one() -> Self {
        QSqrt2::ONE
    }
    fn from_i64(v: i64) -> Self {
        QSqrt2::from_integer(v)
    }
    fn from_exact(v: &QSqrt2) -> Self {
        v.clone()
    }
    fn to_f64(&self) -> f64 {
        QSqrt2::to_f64(self)
    }
    fn inv(&self) -> Result<Self, RingError> {
        QSqrt2::inv(self)
    }
    fn is_negligible(&self) -> bool {
        QSqrt2::is_zero(self)
    }
    fn is_zero(&self) -> bool {
        QSqrt2::is_zero(self)
    }
}

/// Float-mode tolerance for "is zero" decisions.
pub const FLOAT_ZERO_TOL: f64 = 1e-12;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_exact(v: &QSqrt2) -> Self {
        v.to_f64()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn inv(&self) -> Result<Self, RingError> {
        if *self == 0.0 {
            Err(RingError::DivisionByZero)
        } else {
            Ok(1.0 / self)
        }
    }
    fn is_negligible(&self) -> bool {
        self.abs() <= FLOAT_ZERO_TOL
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn half(&self) -> Self {
        self * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-40i64..40, 1i64..12).prop_map(|(n, d)| Rational::new(n, d).unwrap())
    }

    fn element() -> impl Strategy<Value = QSqrt2> {
        (small_rational(), small_rational()).prop_map(|(a, b)| QSqrt2::new(a, b))
    }

    proptest! {
        #[test]
        fn field_axioms(x in element(), y in element(), z in element()) {
            prop_assert_eq!(ring_mul(&ring_mul(&x, &y), &z), ring_mul(&x, &ring_mul(&y, &z)));
            prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
            prop_assert_eq!(ring_mul(&x, &(&y + &z)), &ring_mul(&x, &y) + &ring_mul(&x, &z));
            prop_assert_eq!(ring_mul(&x, &y), ring_mul(&y, &x));
            if !x.is_zero() {
                prop_assert_eq!(ring_mul(&x, &ring_inv(&x).unwrap()), QSqrt2::ONE);
            }
        }

        #[test]
        fn float_image_respects_order(x in element(), y in element()) {
            let exact = (&x - &y).signum();
            let approx = x.to_f64() - y.to_f64();
            if approx.abs() > 1e-12 {
                prop_assert_eq!(exact, approx.signum() as i32);
            }
            prop_assert_eq!(x.cmp(&y) as i32, exact);
        }

        #[test]
        fn render_parse_round_trip(x in element()) {
            prop_assert_eq!(x.to_string().parse::<QSqrt2>().unwrap(), x);
        }

        #[test]
        fn large_products_stay_exact(a in 1i64..i64::MAX / 2, b in 1i64..i64::MAX / 2) {
            let x = QSqrt2::new(Rational::from_integer(a), Rational::from_integer(b));
            let inv = ring_inv(&x).unwrap();
            prop_assert_eq!(ring_mul(&x, &inv), QSqrt2::ONE);
        }
    }

    #[test]
    fn zero_has_no_inverse() {
        assert_eq!(ring_inv(&QSqrt2::ZERO), Err(RingError::DivisionByZero));
        assert!(<f64 as Scalar>::inv(&0.0).is_err());
    }
}
