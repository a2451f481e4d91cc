//! Nonnegative extended reals `[0, +∞]` and closed intervals over them.
//!
//! `+∞` is a separate tag rather than `f64::INFINITY`, so products follow the
//! measure-theoretic convention `0 · ∞ = 0` and comparisons involving infinity
//! are exact.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance used for finite comparisons throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Repr {
    Finite(f64),
    Infinite,
}

/// A value in `[0, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedValue(Repr);

impl ExtendedValue {
    pub const ZERO: Self = ExtendedValue(Repr::Finite(0.0));
    pub const INFINITY: Self = ExtendedValue(Repr::Infinite);

    /// A finite value. Rejects negatives, NaN and IEEE infinities.
    pub fn finite(v: f64) -> Result<Self> {
        if v.is_nan() || v.is_infinite() {
            return Err(Error::Argument(format!("{v} is not a finite real")));
        }
        if v < 0.0 {
            return Err(Error::Argument(format!("{v} is negative")));
        }
        // normalizes -0.0
        Ok(ExtendedValue(Repr::Finite(v + 0.0)))
    }

    /// Maps `f64::INFINITY` to the infinite tag; other inputs as [`Self::finite`].
    pub fn from_f64(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            Ok(Self::INFINITY)
        } else {
            Self::finite(v)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self.0, Repr::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        !self.is_finite()
    }

    /// The finite value, if any.
    pub fn value(self) -> Option<f64> {
        match self.0 {
            Repr::Finite(v) => Some(v),
            Repr::Infinite => None,
        }
    }

    /// Lossy conversion for display and plotting: `+∞` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    /// `w · self` with `0 · ∞ = 0`.
    pub fn scale(self, w: f64) -> Self {
        debug_assert!(w >= 0.0 && w.is_finite());
        match self.0 {
            Repr::Finite(v) => ExtendedValue(Repr::Finite(w * v + 0.0)),
            Repr::Infinite if w == 0.0 => Self::ZERO,
            Repr::Infinite => Self::INFINITY,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Self) -> Self {
        match (self.0, other.0) {
            (Repr::Finite(a), Repr::Finite(b)) => ExtendedValue(Repr::Finite(a + b)),
            _ => Self::INFINITY,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Equality up to an absolute tolerance on finite values; infinities match only each other.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        match (self.0, other.0) {
            (Repr::Finite(a), Repr::Finite(b)) => (a - b).abs() <= tol,
            (Repr::Infinite, Repr::Infinite) => true,
            _ => false,
        }
    }

    /// `self ≤ other + tol`.
    pub fn le_tol(self, other: Self, tol: f64) -> bool {
        match (self.0, other.0) {
            (Repr::Finite(a), Repr::Finite(b)) => a <= b + tol,
            (_, Repr::Infinite) => true,
            (Repr::Infinite, Repr::Finite(_)) => false,
        }
    }

    /// `self − other` as a real, with `∞ − finite = +∞`, `finite − ∞ = −∞`, `∞ − ∞ = 0`.
    pub fn signed_diff(self, other: Self) -> f64 {
        match (self.0, other.0) {
            (Repr::Finite(a), Repr::Finite(b)) => a - b,
            (Repr::Infinite, Repr::Finite(_)) => f64::INFINITY,
            (Repr::Finite(_), Repr::Infinite) => f64::NEG_INFINITY,
            (Repr::Infinite, Repr::Infinite) => 0.0,
        }
    }
}

impl Eq for ExtendedValue {}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            // finite values are never NaN
            (Repr::Finite(a), Repr::Finite(b)) => a.partial_cmp(&b).unwrap(),
            (Repr::Finite(_), Repr::Infinite) => Ordering::Less,
            (Repr::Infinite, Repr::Finite(_)) => Ordering::Greater,
            (Repr::Infinite, Repr::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Repr::Finite(v) => write!(f, "{v}"),
            Repr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Repr::Finite(v) => s.serialize_f64(v),
            Repr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExtVisitor;

        impl Visitor<'_> for ExtVisitor {
            type Value = ExtendedValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                ExtendedValue::finite(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(ExtVisitor)
    }
}

impl std::str::FromStr for ExtendedValue {
    type Err = Error;

    /// Accepts a decimal number or `inf` (case-insensitive, optional leading `+`).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix('+').unwrap_or(t);
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Self::INFINITY);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Validation(format!("cannot parse {s:?} as an extended value")))?;
        Self::finite(v).map_err(|e| Error::Validation(e.to_string()))
    }
}

/// Running sum of extended values that also supports removing a term.
///
/// Infinite terms are counted, so removing one never produces `∞ − ∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtAccumulator {
    finite: f64,
    infinite: u32,
}

impl ExtAccumulator {
    pub fn add(&mut self, v: ExtendedValue) {
        match v.0 {
            Repr::Finite(x) => self.finite += x,
            Repr::Infinite => self.infinite += 1,
        }
    }

    pub fn remove(&mut self, v: ExtendedValue) {
        match v.0 {
            Repr::Finite(x) => self.finite -= x,
            Repr::Infinite => {
                debug_assert!(self.infinite > 0);
                self.infinite -= 1;
            }
        }
    }

    /// Current total divided by `divisor > 0`.
    pub fn mean(&self, divisor: f64) -> ExtendedValue {
        if self.infinite > 0 {
            ExtendedValue::INFINITY
        } else {
            // removal can leave tiny negative drift
            ExtendedValue(Repr::Finite(self.finite.max(0.0) / divisor))
        }
    }

    pub fn total(&self) -> ExtendedValue {
        self.mean(1.0)
    }
}

/// `Σ wᵢ·vᵢ` with `0 · ∞ = 0`; the finite part uses compensated summation.
pub fn ext_weighted_sum(weights: &[f64], values: &[ExtendedValue]) -> Result<ExtendedValue> {
    if weights.len() != values.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} weights, {} values",
            weights.len(),
            values.len()
        )));
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut infinite = false;
    for (&w, &v) in weights.iter().zip(values) {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Argument(format!(
                "weight {w} is not a nonnegative real"
            )));
        }
        if w == 0.0 {
            continue;
        }
        match v.0 {
            Repr::Infinite => infinite = true,
            Repr::Finite(x) => {
                // Neumaier
                let term = w * x;
                let t = sum + term;
                if sum.abs() >= term.abs() {
                    comp += (sum - t) + term;
                } else {
                    comp += (term - t) + sum;
                }
                sum = t;
            }
        }
    }
    if infinite {
        Ok(ExtendedValue::INFINITY)
    } else {
        Ok(ExtendedValue(Repr::Finite((sum + comp).max(0.0))))
    }
}

/// A closed interval `[lo, hi] ⊆ [0, +∞]`; empty when `hi < lo`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtInterval {
    lo: ExtendedValue,
    hi: ExtendedValue,
    empty: bool,
}

impl ExtInterval {
    /// `[0, +∞]`.
    pub const FULL: Self = ExtInterval {
        lo: ExtendedValue::ZERO,
        hi: ExtendedValue::INFINITY,
        empty: false,
    };

    pub fn lo(&self) -> ExtendedValue {
        self.lo
    }

    pub fn hi(&self) -> ExtendedValue {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn contains(&self, t: ExtendedValue) -> bool {
        !self.empty && self.lo <= t && t <= self.hi
    }

    /// `self ⊆ other`, with endpoints compared up to `tol`. The empty set is contained in anything.
    pub fn is_subset_tol(&self, other: &ExtInterval, tol: f64) -> bool {
        if self.empty {
            return true;
        }
        if other.empty {
            return false;
        }
        other.lo.le_tol(self.lo, tol) && self.hi.le_tol(other.hi, tol)
    }

    /// Non-empty with `hi − lo ≤ tol` (two infinite endpoints count as a singleton).
    pub fn is_singleton_tol(&self, tol: f64) -> bool {
        !self.empty && self.hi.le_tol(self.lo, tol)
    }

    /// Endpoint-wise comparison up to `tol`; two empty intervals are equal.
    pub fn approx_eq(&self, other: &ExtInterval, tol: f64) -> bool {
        match (self.empty, other.empty) {
            (true, true) => true,
            (false, false) => self.lo.approx_eq(other.lo, tol) && self.hi.approx_eq(other.hi, tol),
            _ => false,
        }
    }
}

impl fmt::Display for ExtInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            f.write_str("∅")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

/// `[lo, hi]`, empty exactly when `hi < lo`.
pub fn make_interval(lo: ExtendedValue, hi: ExtendedValue) -> ExtInterval {
    ExtInterval {
        lo,
        hi,
        empty: hi < lo,
    }
}

/// Intersection of closed intervals; the empty family yields `[0, +∞]`.
pub fn intersect_intervals(intervals: &[ExtInterval]) -> ExtInterval {
    let mut lo = ExtendedValue::ZERO;
    let mut hi = ExtendedValue::INFINITY;
    for iv in intervals {
        lo = lo.max(iv.lo);
        hi = hi.min(iv.hi);
        if iv.empty {
            // keep the stored endpoints but force emptiness
            return ExtInterval {
                lo,
                hi,
                empty: true,
            };
        }
    }
    make_interval(lo, hi)
}
