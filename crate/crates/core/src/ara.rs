//! Fixed-point currency amounts.
//!
//! One ARA is stored as 1_000_000 micro units. Every ledger operation works
//! on the integer representation so that conservation checks are exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of micro units in one ARA.
pub const MICROS_PER_ARA: i64 = 1_000_000;

/// An amount of ARA with six decimal places.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ara(i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AraParseError {
    #[error("empty amount")]
    Empty,
    #[error("invalid amount `{0}`")]
    Invalid(String),
    #[error("amount `{0}` has more than six decimal places")]
    TooPrecise(String),
    #[error("amount `{0}` out of range")]
    Overflow(String),
}

impl Ara {
    pub const ZERO: Ara = Ara(0);

    pub const fn from_micros(micros: i64) -> Self {
        Ara(micros)
    }

    pub const fn from_whole(units: i64) -> Self {
        Ara(units * MICROS_PER_ARA)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Nearest representable amount; used only when reading human-written
    /// configuration values.
    pub fn from_f64_rounded(value: f64) -> Self {
        Ara((value * MICROS_PER_ARA as f64).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_ARA as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, rhs: Ara) -> Option<Ara> {
        self.0.checked_add(rhs.0).map(Ara)
    }

    pub fn checked_sub(self, rhs: Ara) -> Option<Ara> {
        self.0.checked_sub(rhs.0).map(Ara)
    }

    /// `self * num / den`, rounded toward zero.
    pub fn mul_ratio(self, num: i64, den: i64) -> Ara {
        assert!(den != 0, "zero denominator");
        Ara(((self.0 as i128 * num as i128) / den as i128) as i64)
    }

    pub fn max(self, other: Ara) -> Ara {
        Ara(self.0.max(other.0))
    }

    pub fn min(self, other: Ara) -> Ara {
        Ara(self.0.min(other.0))
    }
}

impl Add for Ara {
    type Output = Ara;
    fn add(self, rhs: Ara) -> Ara {
        Ara(self.0.checked_add(rhs.0).expect("ARA overflow"))
    }
}

impl Sub for Ara {
    type Output = Ara;
    fn sub(self, rhs: Ara) -> Ara {
        Ara(self.0.checked_sub(rhs.0).expect("ARA overflow"))
    }
}

impl AddAssign for Ara {
    fn add_assign(&mut self, rhs: Ara) {
        *self = *self + rhs;
    }
}

impl SubAssign for Ara {
    fn sub_assign(&mut self, rhs: Ara) {
        *self = *self - rhs;
    }
}

impl Sum for Ara {
    fn sum<I: Iterator<Item = Ara>>(iter: I) -> Ara {
        iter.fold(Ara::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Ara> for Ara {
    fn sum<I: Iterator<Item = &'a Ara>>(iter: I) -> Ara {
        iter.copied().sum()
    }
}

impl fmt::Display for Ara {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_ARA as u64;
        let frac = abs % MICROS_PER_ARA as u64;
        write!(f, "{sign}{whole}.{frac:06}")
    }
}

impl FromStr for Ara {
    type Err = AraParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(AraParseError::Empty);
        }
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        let digits = |part: &str| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || !(frac.is_empty() || digits(frac)) {
            return Err(AraParseError::Invalid(s.to_string()));
        }
        if frac.len() > 6 {
            return Err(AraParseError::TooPrecise(s.to_string()));
        }
        let whole: i64 = whole
            .parse()
            .map_err(|_| AraParseError::Overflow(s.to_string()))?;
        let frac_micros: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse::<i64>().unwrap() * 10i64.pow(6 - frac.len() as u32)
        };
        let micros = whole
            .checked_mul(MICROS_PER_ARA)
            .and_then(|w| w.checked_add(frac_micros))
            .ok_or_else(|| AraParseError::Overflow(s.to_string()))?;
        Ok(Ara(if negative { -micros } else { micros }))
    }
}

impl Serialize for Ara {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ara {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(v) => v
                .checked_mul(MICROS_PER_ARA)
                .map(Ara)
                .ok_or_else(|| serde::de::Error::custom("amount out of range")),
            Repr::Float(v) => Ok(Ara::from_f64_rounded(v)),
        }
    }
}
