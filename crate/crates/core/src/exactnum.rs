//! Exact rational arithmetic and dyadic digit extraction.
//!
//! [`Rational`] keeps values in canonical reduced form. Small values live in a
//! machine-word representation and promote to arbitrary precision on overflow,
//! so the common case (dyadic coordinates with modest denominators) never
//! allocates.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("digit of negative value {0}")]
    NegativeDigit(Rational),
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

/// Index of a binary digit; digit `k` has weight `2^-k`.
pub type DigitIndex = i32;

#[derive(Clone)]
enum Repr {
    Small(Ratio<i64>),
    Big(BigRational),
}

/// Exact rational number in canonical form.
#[derive(Clone)]
pub struct Rational(Repr);

fn small_fits(v: &BigInt) -> Option<i64> {
    // i64::MIN is excluded so negation and abs never overflow.
    v.to_i64().filter(|&x| x != i64::MIN)
}

impl Rational {
    fn from_small(r: Ratio<i64>) -> Self {
        if *r.numer() == i64::MIN || *r.denom() == i64::MIN {
            return Rational::from_big(BigRational::new(
                BigInt::from(*r.numer()),
                BigInt::from(*r.denom()),
            ));
        }
        Rational(Repr::Small(r))
    }

    fn from_big(r: BigRational) -> Self {
        match (small_fits(r.numer()), small_fits(r.denom())) {
            (Some(n), Some(d)) => Rational(Repr::Small(Ratio::new_raw(n, d))),
            _ => Rational(Repr::Big(r)),
        }
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(r) => BigRational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            Repr::Big(r) => r.clone(),
        }
    }

    pub fn new(numer: i64, denom: i64) -> Result<Self, NumError> {
        if denom == 0 {
            return Err(NumError::DivisionByZero);
        }
        Ok(Rational::from_big(BigRational::new(numer.into(), denom.into())))
    }

    pub fn from_bigints(numer: BigInt, denom: BigInt) -> Result<Self, NumError> {
        if denom.is_zero() {
            return Err(NumError::DivisionByZero);
        }
        Ok(Rational::from_big(BigRational::new(numer, denom)))
    }

    pub fn integer(v: i64) -> Self {
        Rational::from_small(Ratio::from_integer(v))
    }

    pub fn zero() -> Self {
        Rational::integer(0)
    }

    pub fn one() -> Self {
        Rational::integer(1)
    }

    /// `2^e` for any integer exponent.
    pub fn pow2(e: i32) -> Self {
        if (0..62).contains(&e) {
            Rational::integer(1i64 << e)
        } else if (-61..0).contains(&e) {
            Rational::from_small(Ratio::new_raw(1, 1i64 << (-e)))
        } else if e >= 0 {
            Rational::from_big(BigRational::from_integer(BigInt::one() << (e as usize)))
        } else {
            Rational::from_big(BigRational::new_raw(BigInt::one(), BigInt::one() << ((-e) as usize)))
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.numer()),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.denom()),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_zero(),
            Repr::Big(r) => r.is_zero(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => *r.numer() < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && !self.is_negative()
    }

    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn abs(&self) -> Rational {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => *r.denom() == 1,
            Repr::Big(r) => r.is_integer(),
        }
    }

    /// True when the reduced denominator is a power of two.
    pub fn is_dyadic(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => (*r.denom() as u64).is_power_of_two(),
            Repr::Big(r) => {
                let d = r.denom();
                let tz = d.trailing_zeros().unwrap_or(0);
                (d >> tz as usize).is_one()
            }
        }
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Rational, NumError> {
        if rhs.is_zero() {
            return Err(NumError::DivisionByZero);
        }
        Ok(self.div_nonzero(rhs))
    }

    fn div_nonzero(&self, rhs: &Rational) -> Rational {
        if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
            if let Some(r) = a.checked_div(b) {
                return Rational::from_small(r);
            }
        }
        Rational::from_big(self.to_big() / rhs.to_big())
    }

    pub fn recip(&self) -> Result<Rational, NumError> {
        Rational::one().checked_div(self)
    }

    /// Greatest integer `<= self`.
    pub fn floor(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(r.numer().div_floor(r.denom())),
            Repr::Big(r) => r.numer().div_floor(r.denom()),
        }
    }

    pub fn floor_rational(&self) -> Rational {
        Rational::from_big(BigRational::from_integer(self.floor()))
    }

    /// `floor(self)` when it fits in an `i64`.
    pub fn floor_i64(&self) -> Option<i64> {
        match &self.0 {
            Repr::Small(r) => Some(r.numer().div_floor(r.denom())),
            Repr::Big(_) => self.floor().to_i64(),
        }
    }

    /// Parity of `floor(self)`: true when even.
    pub fn floor_is_even(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.numer().div_floor(r.denom()).is_even(),
            Repr::Big(_) => self.floor().is_even(),
        }
    }

    /// Multiply by `2^e`.
    pub fn mul_pow2(&self, e: i32) -> Rational {
        self * &Rational::pow2(e)
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(r) => *r.numer() as f64 / *r.denom() as f64,
            Repr::Big(r) => {
                let n = r.numer().to_f64().unwrap_or(f64::NAN);
                let d = r.denom().to_f64().unwrap_or(f64::NAN);
                if n.is_finite() && d.is_finite() {
                    n / d
                } else {
                    // Scale down both parts to keep the quotient representable.
                    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000) as usize;
                    let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
                    let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
                    n / d
                }
            }
        }
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self { other } else { self }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self { other } else { self }
    }
}

/// Binary digit of weight `2^-k` in the terminating expansion of `x >= 0`:
/// `floor(2^k x) mod 2`.
pub fn digit(x: &Rational, k: DigitIndex) -> Result<u8, NumError> {
    if x.is_negative() {
        return Err(NumError::NegativeDigit(x.clone()));
    }
    Ok(if x.mul_pow2(k).floor_is_even() { 0 } else { 1 })
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::integer(v)
    }
}

impl From<i32> for Rational {
    fn from(v: i32) -> Self {
        Rational::integer(v as i64)
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::from_big(BigRational::from_integer(v))
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a == b,
            // Canonical form: a value that fits is always Small.
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(r) => {
                0u8.hash(state);
                r.hash(state)
            }
            Repr::Big(r) => {
                1u8.hash(state);
                r.hash(state)
            }
        }
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
                    if let Some(r) = a.$checked(b) {
                        return Rational::from_small(r);
                    }
                }
                Rational::from_big($trait::$method(self.to_big(), rhs.to_big()))
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $trait::$method(&self, &rhs)
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                $trait::$method(&self, rhs)
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $trait::$method(self, &rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

/// Panics on a zero divisor, like integer division. Use
/// [`Rational::checked_div`] when the divisor may vanish.
impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        self.checked_div(rhs).expect("rational division by zero")
    }
}

impl Div<Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}

impl<'a> Div<&'a Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        &self / rhs
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(r) => Rational::from_small(-*r),
            Repr::Big(r) => Rational::from_big(-r.clone()),
        }
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Repr::Small(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Repr::Big(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = NumError;

    /// Accepts `p`, `p/q` and `-p/q` with decimal integers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || NumError::Parse(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        Rational::from_bigints(n, d)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Rational::integer(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Shorthand for `Rational::new(n, d).unwrap()` with a nonzero literal denominator.
pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d).expect("nonzero denominator")
}
