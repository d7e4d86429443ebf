//! Exact rational numbers used for simulated real time and clock values.
//!
//! All times and real-valued clock elements in this crate are exact
//! rationals, never floats, so orderings and simultaneity are decidable
//! exactly. On the wire a rational serializes as a plain JSON integer when
//! its denominator is 1, and as a `"num/den"` string otherwise.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational number backed by `i64` numerator and denominator.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(Rational64);

impl Rat {
    pub const ZERO: Rat = Rat(Rational64::new_raw(0, 1));
    pub const ONE: Rat = Rat(Rational64::new_raw(1, 1));

    /// Const constructor; `num/den` must already be in lowest terms with
    /// a positive denominator.
    pub const fn new_raw(num: i64, den: i64) -> Rat {
        Rat(Rational64::new_raw(num, den))
    }

    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0, "rational with zero denominator");
        Rat(Rational64::new(num, den))
    }

    pub fn from_int(n: i64) -> Rat {
        Rat(Rational64::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Largest integer `<= self`.
    pub fn floor(&self) -> i64 {
        self.0.floor().to_integer()
    }

    /// Smallest integer strictly greater than `self`.
    pub fn next_integer(&self) -> i64 {
        self.floor() + 1
    }

    /// Midpoint of `self` and `other`.
    pub fn midpoint(&self, other: Rat) -> Rat {
        Rat((self.0 + other.0) / 2)
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::from_int(n)
    }
}

impl From<u32> for Rat {
    fn from(n: u32) -> Rat {
        Rat::from_int(n as i64)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat(self.0 + rhs.0)
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        Rat(self.0 - rhs.0)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat(self.0 * rhs.0)
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        Rat(self.0 / rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Zero for Rat {
    fn zero() -> Rat {
        Rat::ZERO
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational `{input}`: expected an integer or `num/den`")]
pub struct ParseRatError {
    input: String,
}

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Rat, ParseRatError> {
        let bad = || ParseRatError {
            input: s.to_string(),
        };
        match s.split_once('/') {
            None => s
                .trim()
                .parse::<i64>()
                .map(Rat::from_int)
                .map_err(|_| bad()),
            Some((num, den)) => {
                let num: i64 = num.trim().parse().map_err(|_| bad())?;
                let den: i64 = den.trim().parse().map_err(|_| bad())?;
                if den <= 0 {
                    return Err(bad());
                }
                Ok(Rat::new(num, den))
            }
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            serializer.serialize_i64(self.numer())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

struct RatVisitor;

impl Visitor<'_> for RatVisitor {
    type Value = Rat;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an integer or a `num/den` string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
        Ok(Rat::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
        i64::try_from(v)
            .map(Rat::from_int)
            .map_err(|_| E::custom("integer out of range for rational"))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        deserializer.deserialize_any(RatVisitor)
    }
}

/// Shorthand for `Rat::new` used pervasively in tests.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_integer_and_fraction() {
        assert_eq!(Rat::from_int(3).to_string(), "3");
        assert_eq!(rat(3, 2).to_string(), "3/2");
        assert_eq!(rat(-1, 2).to_string(), "-1/2");
        assert_eq!(rat(4, 2).to_string(), "2");
    }

    #[test]
    fn next_integer_is_strictly_greater() {
        assert_eq!(rat(3, 2).next_integer(), 2);
        assert_eq!(Rat::from_int(2).next_integer(), 3);
        assert_eq!(Rat::ZERO.next_integer(), 1);
        assert_eq!(rat(-1, 2).next_integer(), 0);
    }

    #[test]
    fn midpoint_stays_inside() {
        let m = Rat::from_int(1).midpoint(Rat::from_int(2));
        assert_eq!(m, rat(3, 2));
    }

    #[test]
    fn serde_integer_form() {
        let json = serde_json::to_string(&Rat::from_int(5)).unwrap();
        assert_eq!(json, "5");
        let back: Rat = serde_json::from_str("5").unwrap();
        assert_eq!(back, Rat::from_int(5));
    }

    #[test]
    fn serde_fraction_form() {
        let json = serde_json::to_string(&rat(7, 4)).unwrap();
        assert_eq!(json, "\"7/4\"");
        let back: Rat = serde_json::from_str("\"7/4\"").unwrap();
        assert_eq!(back, rat(7, 4));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("x".parse::<Rat>().is_err());
        assert!("1/0".parse::<Rat>().is_err());
        assert!("1/-2".parse::<Rat>().is_err());
    }

    proptest! {
        #[test]
        fn serde_round_trip(num in -100_000i64..100_000, den in 1i64..10_000) {
            let r = Rat::new(num, den);
            let json = serde_json::to_string(&r).unwrap();
            let back: Rat = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(r, back);
        }

        #[test]
        fn ordering_matches_f64(a in -1000i64..1000, b in 1i64..64, c in -1000i64..1000, d in 1i64..64) {
            let x = Rat::new(a, b);
            let y = Rat::new(c, d);
            prop_assert_eq!(x < y, x.to_f64() < y.to_f64());
        }
    }
}
