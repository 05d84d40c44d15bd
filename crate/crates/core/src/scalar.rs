//! Exact scalar arithmetic and projective ratios.
//!
//! Every decision in this crate is a sign test or an equality test on
//! rationals, so all scalars are arbitrary-precision fractions kept in
//! lowest terms. [`ProjectiveRatio`] extends the nonnegative rationals
//! with a point at infinity (`den == 0`) for ratios of vector entries.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

/// An exact rational number, always in lowest terms with positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(BigRational);

/// Error raised by scalar construction or parsing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScalarError {
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar(BigRational::from_integer(BigInt::from(n)))
    }

    /// Builds `num/den`, reducing to lowest terms. Fails on a zero denominator.
    pub fn new(num: BigInt, den: BigInt) -> Result<Self, ScalarError> {
        if den.is_zero() {
            return Err(ScalarError::ZeroDenominator);
        }
        Ok(Scalar(BigRational::new(num, den)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Scalar(BigRational::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Scalar(self.0.abs())
    }

    pub fn recip(&self) -> Result<Self, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::ZeroDenominator);
        }
        Ok(Scalar(self.0.recip()))
    }

    pub fn to_f64(&self) -> f64 {
        big_ratio_to_f64(self.0.numer(), self.0.denom())
    }

    /// Canonical `"p/q"` form, denominator always present.
    pub fn to_fraction_string(&self) -> String {
        format!("{}/{}", self.0.numer(), self.0.denom())
    }

    /// Parses `"p"`, `"p/q"`, or a plain decimal such as `"0.001"` (exactly).
    pub fn parse(text: &str) -> Result<Self, ScalarError> {
        let s = text.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n = BigInt::from_str(num.trim())
                .map_err(|_| ScalarError::Malformed(text.to_string()))?;
            let d = BigInt::from_str(den.trim())
                .map_err(|_| ScalarError::Malformed(text.to_string()))?;
            return Scalar::new(n, d);
        }
        if let Some((whole, frac)) = s.split_once('.') {
            let whole = if whole.is_empty() { "0" } else { whole };
            let sign = if whole.starts_with('-') { -1 } else { 1 };
            let w =
                BigInt::from_str(whole).map_err(|_| ScalarError::Malformed(text.to_string()))?;
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ScalarError::Malformed(text.to_string()));
            }
            let f = BigInt::from_str(frac).map_err(|_| ScalarError::Malformed(text.to_string()))?;
            let den = BigInt::from(10u32).pow(frac.len() as u32);
            let num = &w * &den + BigInt::from(sign) * f;
            return Scalar::new(num, den);
        }
        let n = BigInt::from_str(s).map_err(|_| ScalarError::Malformed(text.to_string()))?;
        Ok(Scalar::from_bigint(n))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                Scalar((&self.0).$method(&rhs.0))
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);
scalar_binop!(Div, div);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_fraction_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Scalar::parse(&s).map_err(de::Error::custom)
    }
}

/// A point of `[0, +inf]`: a pair of nonnegative integers, not both zero,
/// with infinity encoded as a zero denominator. Comparison and equality are
/// projective (cross-multiplied), so the pair need not be reduced.
#[derive(Clone)]
pub struct ProjectiveRatio {
    num: BigInt,
    den: BigInt,
}

impl ProjectiveRatio {
    /// Requires `num >= 0`, `den >= 0`, not both zero.
    pub fn new(num: BigInt, den: BigInt) -> Option<Self> {
        if num.is_negative() || den.is_negative() || (num.is_zero() && den.is_zero()) {
            return None;
        }
        Some(ProjectiveRatio { num, den })
    }

    pub fn from_ints(num: i64, den: i64) -> Self {
        ProjectiveRatio::new(BigInt::from(num), BigInt::from(den)).expect("valid ratio")
    }

    pub fn zero() -> Self {
        ProjectiveRatio::from_ints(0, 1)
    }

    pub fn infinity() -> Self {
        ProjectiveRatio::from_ints(1, 0)
    }

    /// Builds the ratio of two nonnegative scalars (`a/b`), mapping `x/0` to infinity.
    pub fn from_scalars(num: &Scalar, den: &Scalar) -> Option<Self> {
        if num.is_negative() || den.is_negative() {
            return None;
        }
        // num = a/b, den = c/d  =>  ratio = a*d / (c*b)
        ProjectiveRatio::new(num.numer() * den.denom(), den.numer() * num.denom())
    }

    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn den(&self) -> &BigInt {
        &self.den
    }

    pub fn is_infinite(&self) -> bool {
        self.den.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_finite_positive(&self) -> bool {
        !self.num.is_zero() && !self.den.is_zero()
    }

    pub fn recip(&self) -> Self {
        ProjectiveRatio {
            num: self.den.clone(),
            den: self.num.clone(),
        }
    }

    /// Reduces by the gcd; canonical forms are `0/1`, `1/0`, or coprime `p/q`.
    pub fn reduced(&self) -> Self {
        if self.num.is_zero() {
            return ProjectiveRatio::zero();
        }
        if self.den.is_zero() {
            return ProjectiveRatio::infinity();
        }
        let g = num_integer::Integer::gcd(&self.num, &self.den);
        ProjectiveRatio {
            num: &self.num / &g,
            den: &self.den / &g,
        }
    }

    /// Total bit size of the pair; a cheap proxy for reduction cost.
    pub fn bits(&self) -> u64 {
        self.num.bits() + self.den.bits()
    }

    pub fn to_f64(&self) -> f64 {
        big_ratio_to_f64(&self.num, &self.den)
    }

    /// The compactified value m(t) = t/(1+t) in [0, 1], exactly.
    pub fn m_exact(&self) -> Scalar {
        Scalar::new(self.num.clone(), &self.num + &self.den).expect("num+den > 0")
    }

    /// The compactified value m(t) = t/(1+t) in [0, 1], as f64.
    pub fn m_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        if self.den.is_zero() {
            return 1.0;
        }
        // 1 / (1 + den/num) is stable for wildly unbalanced pairs.
        let r = big_ratio_to_f64(&self.den, &self.num);
        1.0 / (1.0 + r)
    }

    /// Exact value as a Scalar; fails on infinity.
    pub fn to_scalar(&self) -> Option<Scalar> {
        if self.den.is_zero() {
            return None;
        }
        Some(Scalar::new(self.num.clone(), self.den.clone()).expect("nonzero denominator"))
    }
}

impl PartialEq for ProjectiveRatio {
    fn eq(&self, other: &Self) -> bool {
        &self.num * &other.den == &other.num * &self.den
    }
}

impl Eq for ProjectiveRatio {}

impl PartialOrd for ProjectiveRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ProjectiveRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        // Both nonnegative; infinities compare equal to each other and
        // greater than any finite value. Cross-multiplication is exact.
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl fmt::Display for ProjectiveRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reduced();
        write!(f, "{}/{}", r.num, r.den)
    }
}

impl fmt::Debug for ProjectiveRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for ProjectiveRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// f64 value of `num/den` for arbitrarily large nonnegative integers,
/// shifting both operands into range before dividing.
pub fn big_ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if den.is_zero() {
        if num.is_zero() {
            return f64::NAN;
        }
        return f64::INFINITY;
    }
    if num.is_zero() {
        return 0.0;
    }
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n_f = (num >> shift_n as u64).to_f64().unwrap_or(f64::MAX);
    let d_f = (den >> shift_d as u64).to_f64().unwrap_or(f64::MAX);
    let exp = shift_n - shift_d;
    if exp > 3000 {
        return f64::INFINITY * n_f.signum();
    }
    if exp < -3000 {
        return 0.0;
    }
    (n_f / d_f) * 2f64.powi(exp as i32)
}
