//! Non-negative exact rationals for scale factors and metaparameters.
//!
//! On the wire a value may be an integer (`4`), a decimal (`0.125`) or a
//! fraction string (`"1/8"`). Decimals are read from their shortest textual
//! form, so `0.1` is exactly one tenth.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<u64>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational `{0}`: expected an integer, a decimal or a fraction like 1/8")]
pub struct ParseRationalError(String);

impl Rational {
    pub fn new(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn integer(n: u64) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.numer() == 1 && self.denom() == 1
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `round_half_up(n * self)` and whether rounding changed the value.
    pub fn scale_round(&self, n: u64) -> (u64, bool) {
        let num = n as u128 * self.numer() as u128;
        let den = self.denom() as u128;
        let (q, r) = num.div_rem(&den);
        let q = if 2 * r >= den { q + 1 } else { q };
        (q.to_u64().unwrap_or(u64::MAX), r != 0)
    }

    /// Finite decimal expansion, if the denominator has only factors 2 and 5.
    fn decimal(&self) -> Option<String> {
        let mut d = self.denom();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while d.is_multiple_of(2) {
            d /= 2;
            twos += 1;
        }
        while d.is_multiple_of(5) {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return None;
        }
        let places = twos.max(fives);
        let scale = 10u128.pow(places);
        let scaled = self.numer() as u128 * scale / self.denom() as u128;
        let digits = scaled.to_string();
        if places == 0 {
            return Some(digits);
        }
        let p = places as usize;
        let digits = format!("{digits:0>width$}", width = p + 1);
        let (int, frac) = digits.split_at(digits.len() - p);
        Some(format!("{int}.{frac}"))
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::integer(n)
    }
}

impl From<Rational> for Ratio<u64> {
    fn from(r: Rational) -> Self {
        r.0
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| err())?;
            let d: u64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Rational::new(n, d));
        }
        if let Some((m, e)) = t.split_once(['e', 'E']) {
            let m: Rational = m.parse().map_err(|_| err())?;
            let e: i32 = e.parse().map_err(|_| err())?;
            let p = 10u64.checked_pow(e.unsigned_abs()).ok_or_else(err)?;
            let (n, d) = if e >= 0 {
                (m.numer().checked_mul(p), Some(m.denom()))
            } else {
                (Some(m.numer()), m.denom().checked_mul(p))
            };
            return match (n, d) {
                (Some(n), Some(d)) => Ok(Rational::new(n, d)),
                _ => Err(err()),
            };
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let frac = frac.trim_end_matches('0');
        let den = 10u64.checked_pow(frac.len() as u32).ok_or_else(err)?;
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| err())?
        };
        let frac_v: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| err())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac_v))
            .ok_or_else(err)?;
        Ok(Rational::new(num, den))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.denom() == 1 {
            return s.serialize_u64(self.numer());
        }
        match self.decimal() {
            // Short decimals survive a trip through f64 and back.
            Some(d) if d.len() <= 16 => s.serialize_f64(self.to_f64()),
            _ => s.serialize_str(&format!("{}/{}", self.numer(), self.denom())),
        }
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rational;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative number or a fraction string like \"1/8\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::integer(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                u64::try_from(v)
                    .map(Rational::integer)
                    .map_err(|_| E::custom("must not be negative"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
                if !v.is_finite() || v < 0.0 {
                    return Err(E::custom("must be a finite non-negative number"));
                }
                format!("{v}").parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}
