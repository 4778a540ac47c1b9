//! Exact resource quantities.
//!
//! Every memory, CPU-load, execution-time and capacity value is an exact
//! rational so that boundary checks such as `5 <= 5` never depend on binary
//! floating-point rounding. On the wire a quantity is a decimal string
//! (`"0.6"`, `"22"`, `"-1.25"`); values whose denominator is not of the form
//! `2^a * 5^b` fall back to `"p/q"`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational quantity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Quantity(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid quantity {text:?}: {reason}")]
pub struct ParseQuantityError {
    text: String,
    reason: &'static str,
}

impl Quantity {
    pub const ZERO: Quantity = Quantity(Ratio::new_raw(0, 1));
    pub const ONE: Quantity = Quantity(Ratio::new_raw(1, 1));

    pub fn new(numer: i128, denom: i128) -> Self {
        Quantity(Ratio::new(numer, denom))
    }

    pub fn from_integer(value: i128) -> Self {
        Quantity(Ratio::from_integer(value))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        num_traits::CheckedAdd::checked_add(&self.0, &rhs.0).map(Quantity)
    }

    pub fn checked_mul(self, rhs: Self) -> Option<Self> {
        num_traits::CheckedMul::checked_mul(&self.0, &rhs.0).map(Quantity)
    }

    /// `self * scale` as an integer, if that product is integral and fits.
    pub fn scaled_integer(self, scale: i128) -> Option<i128> {
        let (q, r) = scale.div_rem(&self.denom());
        if r != 0 {
            return None;
        }
        self.numer().checked_mul(q)
    }

    /// Lossy conversion for reporting only; never used in comparisons.
    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// True when the value has a finite decimal expansion.
    pub fn is_decimal(&self) -> bool {
        let mut d = self.denom();
        while d % 2 == 0 {
            d /= 2;
        }
        while d % 5 == 0 {
            d /= 5;
        }
        d == 1
    }
}

impl fmt::Debug for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let numer = self.numer();
        let denom = self.denom();
        if denom == 1 {
            return write!(f, "{numer}");
        }
        if !self.is_decimal() {
            return write!(f, "{numer}/{denom}");
        }
        // Smallest power of ten divisible by the denominator.
        let mut digits = 0usize;
        let mut pow = 1i128;
        while pow % denom != 0 {
            pow *= 10;
            digits += 1;
        }
        let scaled = numer * (pow / denom);
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let pow = pow as u128;
        write!(f, "{sign}{}.{:0width$}", abs / pow, abs % pow, width = digits)
    }
}

impl FromStr for Quantity {
    type Err = ParseQuantityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseQuantityError { text: s.to_string(), reason };
        let text = s.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: i128 = n.trim().parse().map_err(|_| err("bad numerator"))?;
            let d: i128 = d.trim().parse().map_err(|_| err("bad denominator"))?;
            if d == 0 {
                return Err(err("zero denominator"));
            }
            return Ok(Quantity::new(n, d));
        }
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err("empty"));
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(err("not a decimal number"));
        }
        if frac_part.len() > 30 {
            return Err(err("too many fractional digits"));
        }
        let digits = format!("{int_part}{frac_part}");
        let magnitude: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err("out of range"))? };
        let denom = 10i128.pow(frac_part.len() as u32);
        let numer = if negative { -magnitude } else { magnitude };
        Ok(Quantity::new(numer, denom))
    }
}

impl From<i64> for Quantity {
    fn from(value: i64) -> Self {
        Quantity::from_integer(value as i128)
    }
}

impl From<u64> for Quantity {
    fn from(value: u64) -> Self {
        Quantity::from_integer(value as i128)
    }
}

impl Add for Quantity {
    type Output = Quantity;
    fn add(self, rhs: Self) -> Self {
        Quantity(self.0 + rhs.0)
    }
}

impl AddAssign for Quantity {
    fn add_assign(&mut self, rhs: Self) {
        self.0 = self.0 + rhs.0;
    }
}

impl Sub for Quantity {
    type Output = Quantity;
    fn sub(self, rhs: Self) -> Self {
        Quantity(self.0 - rhs.0)
    }
}

impl Mul for Quantity {
    type Output = Quantity;
    fn mul(self, rhs: Self) -> Self {
        Quantity(self.0 * rhs.0)
    }
}

impl Div for Quantity {
    type Output = Quantity;
    fn div(self, rhs: Self) -> Self {
        Quantity(self.0 / rhs.0)
    }
}

impl Sum for Quantity {
    fn sum<I: Iterator<Item = Quantity>>(iter: I) -> Self {
        iter.fold(Quantity::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Quantity> for Quantity {
    fn sum<I: Iterator<Item = &'a Quantity>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct QuantityVisitor;

        impl Visitor<'_> for QuantityVisitor {
            type Value = Quantity;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
                Ok(Quantity::from(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
                Ok(Quantity::from(v))
            }

            fn visit_f64<E: de::Error>(self, _: f64) -> Result<Quantity, E> {
                Err(E::custom("binary floating-point numbers are not accepted; use a decimal string"))
            }
        }

        deserializer.deserialize_any(QuantityVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Quantity {
        s.parse().unwrap()
    }

    #[test]
    fn parses_decimal_strings() {
        assert_eq!(q("0.6"), Quantity::new(3, 5));
        assert_eq!(q("22"), Quantity::from_integer(22));
        assert_eq!(q("-1.25"), Quantity::new(-5, 4));
        assert_eq!(q(".5"), Quantity::new(1, 2));
        assert_eq!(q("1/3"), Quantity::new(1, 3));
        assert!("".parse::<Quantity>().is_err());
        assert!("1e3".parse::<Quantity>().is_err());
        assert!("1/0".parse::<Quantity>().is_err());
        assert!("--1".parse::<Quantity>().is_err());
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(q("0.60").to_string(), "0.6");
        assert_eq!(q("0.05").to_string(), "0.05");
        assert_eq!(q("-0.05").to_string(), "-0.05");
        assert_eq!(q("10").to_string(), "10");
        assert_eq!(Quantity::new(1, 3).to_string(), "1/3");
        assert_eq!(Quantity::new(-7, 8).to_string(), "-0.875");
    }

    #[test]
    fn tenths_sum_exactly() {
        let total: Quantity = std::iter::repeat_n(q("0.1"), 6).sum();
        assert_eq!(total, q("0.6"));
    }

    #[test]
    fn rejects_json_floats() {
        assert!(serde_json::from_str::<Quantity>("0.1").is_err());
        assert_eq!(serde_json::from_str::<Quantity>("5").unwrap(), q("5"));
        assert_eq!(serde_json::from_str::<Quantity>("\"0.1\"").unwrap(), q("0.1"));
    }

    proptest! {
        #[test]
        fn display_round_trips(n in -1_000_000i128..1_000_000, d in 1i128..2_000) {
            let value = Quantity::new(n, d);
            prop_assert_eq!(value.to_string().parse::<Quantity>().unwrap(), value);
        }
    }
}
