//! The quadratic field ℚ(√2).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use super::{Rational, RingError};

/// `a + b·√2` with exact rational parts.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct QSqrt2 {
    pub a: Rational,
    pub b: Rational,
}

impl QSqrt2 {
    pub const ZERO: QSqrt2 = QSqrt2 { a: Rational::ZERO, b: Rational::ZERO };
    pub const ONE: QSqrt2 = QSqrt2 { a: Rational::ONE, b: Rational::ZERO };
    pub const SQRT2: QSqrt2 = QSqrt2 { a: Rational::ZERO, b: Rational::ONE };

    pub fn new(a: Rational, b: Rational) -> Self {
        QSqrt2 { a, b }
    }

    pub fn from_rational(a: Rational) -> Self {
        QSqrt2 { a, b: Rational::ZERO }
    }

    pub fn from_integer(v: i64) -> Self {
        Self::from_rational(Rational::from_integer(v))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// `a − b√2`
    pub fn conjugate(&self) -> QSqrt2 {
        QSqrt2 { a: self.a.clone(), b: -&self.b }
    }

    /// Field norm `a² − 2b²`; zero only for the zero element.
    pub fn norm(&self) -> Rational {
        if self.b.is_zero() {
            return &self.a * &self.a;
        }
        let two_b2 = &(&self.b * &self.b) * &Rational::from_integer(2);
        &(&self.a * &self.a) - &two_b2
    }

    pub fn inv(&self) -> Result<QSqrt2, RingError> {
        if self.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        if self.b.is_zero() {
            return Ok(Self::from_rational(self.a.recip()?));
        }
        let n = self.norm().recip()?;
        Ok(QSqrt2 { a: &self.a * &n, b: -(&self.b * &n) })
    }

    pub fn checked_div(&self, rhs: &QSqrt2) -> Result<QSqrt2, RingError> {
        Ok(self * &rhs.inv()?)
    }

    pub fn scale(&self, r: &Rational) -> QSqrt2 {
        QSqrt2 { a: &self.a * r, b: &self.b * r }
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64() + self.b.to_f64() * std::f64::consts::SQRT_2
    }

    /// Sign of the real number `a + b√2`, decided exactly.
    pub fn signum(&self) -> i32 {
        let (sa, sb) = (self.a.signum(), self.b.signum());
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        // Opposite signs: compare a² with 2b².
        let a2 = &self.a * &self.a;
        let b2 = &(&self.b * &self.b) * &Rational::from_integer(2);
        match a2.cmp(&b2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn pow(&self, e: u32) -> QSqrt2 {
        let mut acc = QSqrt2::ONE;
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    fn mul_ref(&self, rhs: &QSqrt2) -> QSqrt2 {
        match (self.b.is_zero(), rhs.b.is_zero()) {
            (true, true) => Self::from_rational(&self.a * &rhs.a),
            (true, false) => rhs.scale(&self.a),
            (false, true) => self.scale(&rhs.a),
            (false, false) => {
                let two = Rational::from_integer(2);
                let a = &(&self.a * &rhs.a) + &(&(&self.b * &rhs.b) * &two);
                let b = &(&self.a * &rhs.b) + &(&self.b * &rhs.a);
                QSqrt2 { a, b }
            }
        }
    }
}

impl Ord for QSqrt2 {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl PartialOrd for QSqrt2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Rational> for QSqrt2 {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

impl From<i64> for QSqrt2 {
    fn from(v: i64) -> Self {
        Self::from_integer(v)
    }
}

impl<'a> Add<&'a QSqrt2> for &'a QSqrt2 {
    type Output = QSqrt2;
    fn add(self, rhs: &'a QSqrt2) -> QSqrt2 {
        QSqrt2 { a: &self.a + &rhs.a, b: &self.b + &rhs.b }
    }
}

impl<'a> Sub<&'a QSqrt2> for &'a QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, rhs: &'a QSqrt2) -> QSqrt2 {
        QSqrt2 { a: &self.a - &rhs.a, b: &self.b - &rhs.b }
    }
}

impl<'a> Mul<&'a QSqrt2> for &'a QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, rhs: &'a QSqrt2) -> QSqrt2 {
        self.mul_ref(rhs)
    }
}

impl Add for QSqrt2 {
    type Output = QSqrt2;
    fn add(self, rhs: QSqrt2) -> QSqrt2 {
        &self + &rhs
    }
}

impl Sub for QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, rhs: QSqrt2) -> QSqrt2 {
        &self - &rhs
    }
}

impl Mul for QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, rhs: QSqrt2) -> QSqrt2 {
        self.mul_ref(&rhs)
    }
}

impl AddAssign<&QSqrt2> for QSqrt2 {
    fn add_assign(&mut self, rhs: &QSqrt2) {
        self.a = &self.a + &rhs.a;
        if !rhs.b.is_zero() {
            self.b = &self.b + &rhs.b;
        }
    }
}

impl SubAssign<&QSqrt2> for QSqrt2 {
    fn sub_assign(&mut self, rhs: &QSqrt2) {
        self.a = &self.a - &rhs.a;
        if !rhs.b.is_zero() {
            self.b = &self.b - &rhs.b;
        }
    }
}

impl Neg for QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 { a: -self.a, b: -self.b }
    }
}

impl Neg for &QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 { a: -&self.a, b: -&self.b }
    }
}

/// Renders as `p/q`, `r/s√2`, or `p/q+r/s√2` (`-` when the radical part is negative).
impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "{}√2", self.b),
            (false, false) if self.b.signum() < 0 => write!(f, "{}-{}√2", self.a, -&self.b),
            (false, false) => write!(f, "{}+{}√2", self.a, self.b),
        }
    }
}

impl fmt::Debug for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for QSqrt2 {
    type Err = RingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let Some(body) = s.strip_suffix("√2") else {
            return Ok(Self::from_rational(s.parse()?));
        };
        // Split at the last sign that is not the leading one.
        let split = body
            .char_indices()
            .skip(1)
            .filter(|(_, c)| *c == '+' || *c == '-')
            .map(|(i, _)| i)
            .last();
        match split {
            None => Ok(QSqrt2 { a: Rational::ZERO, b: body.parse()? }),
            Some(i) => {
                let a: Rational = body[..i].parse()?;
                let b: Rational = body[i + 1..].parse()?;
                let b = if &body[i..i + 1] == "-" { -b } else { b };
                Ok(QSqrt2 { a, b })
            }
        }
    }
}
