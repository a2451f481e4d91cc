//! Rendezvous and average intervals.
//!
//! * `R_n(H, L) = [M_n(H, L), M̄_n(H, L)]`, from `n`-point systems
//! * `R(H, L) = [M(H, L), M̄(H, L)]`, read off the game values
//! * `A(H, L) = [q̲(H, L), q(H, L)]`, from probability measures
//!
//! On finite spaces the Chebyshev limits equal the game values, so `R` and `A`
//! come out of the same two solves; the truncated `R_n` list is kept alongside
//! to show the approach.

use std::io::Write;

use serde::Serialize;

use crate::confopt::{cheb_n, dual_cheb_n, Method, SearchOptions};
use crate::error::Result;
use crate::ext::{intersect_intervals, make_interval, ExtInterval, ExtendedValue};
use crate::game::{q_lower, q_value};
use crate::space::{DiscreteSpace, SubsetRef};

/// Relative endpoint tolerance for singleton detection.
pub const SINGLETON_TOL: f64 = 1e-6;
/// Endpoints crossing by less than this (relative) are solver noise, not emptiness.
const CROSSING_TOL: f64 = 1e-9;

pub fn singleton_tol(iv: &ExtInterval) -> f64 {
    SINGLETON_TOL * iv.hi().value().map_or(1.0, |v| v.max(1.0))
}

/// `[lo, hi]`, treating `lo > hi` by a rounding-level margin as the point `hi`.
fn game_interval(lo: ExtendedValue, hi: ExtendedValue) -> ExtInterval {
    let iv = make_interval(lo, hi);
    if iv.is_empty() {
        let tol = CROSSING_TOL * hi.value().map_or(1.0, |v| v.max(1.0));
        if lo.le_tol(hi, tol) {
            return make_interval(hi, hi);
        }
    }
    iv
}

/// `R_n(H, L) = [M_n, M̄_n]`; may be empty. With local search the computed
/// interval contains the true one.
pub fn rendezvous_interval_n(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
) -> Result<ExtInterval> {
    let lo = cheb_n(space, h, l, n, opts)?.value;
    let hi = dual_cheb_n(space, h, l, n, opts)?.value;
    Ok(make_interval(lo, hi))
}

/// `R(H, L) = [M(H, L), M̄(H, L)] = [q̲(H, L), q(H, L)]`.
pub fn rendezvous_interval(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
) -> Result<ExtInterval> {
    let lo = q_lower(space, h, l)?.value;
    let hi = q_value(space, h, l)?.value;
    Ok(game_interval(lo, hi))
}

/// `A(H, L) = [q̲(H, L), q(H, L)]`.
pub fn average_interval(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
) -> Result<ExtInterval> {
    let lo = q_lower(space, h, l)?.value;
    let hi = q_value(space, h, l)?.value;
    Ok(game_interval(lo, hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct RnEntry {
    pub n: usize,
    pub method: Method,
    #[serde(flatten)]
    pub interval: ExtInterval,
}

#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct RendezvousReport {
    pub H_label: String,
    pub L_label: String,
    pub R_n: Vec<RnEntry>,
    pub R: ExtInterval,
    pub A: ExtInterval,
    pub unique_number: Option<ExtendedValue>,
}

impl RendezvousReport {
    /// Intersection of the recorded `R_n`; contains `R` up to tolerance.
    pub fn truncated_r(&self) -> ExtInterval {
        let ivs: Vec<ExtInterval> = self.R_n.iter().map(|e| e.interval).collect();
        intersect_intervals(&ivs)
    }

    /// CSV rows `n,M_n,Mbar_n` (infinite values written as `inf`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "M_n", "Mbar_n"])?;
        for e in &self.R_n {
            w.write_record([
                e.n.to_string(),
                e.interval.lo().to_string(),
                e.interval.hi().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full report: `R_n` for `n = 1..=n_max`, `R`, `A` and the unique rendezvous
/// number when `R` is a singleton.
pub fn rendezvous_report(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n_max: usize,
    opts: &SearchOptions,
) -> Result<RendezvousReport> {
    let r_n = (1..=n_max)
        .map(|n| {
            Ok(RnEntry {
                n,
                method: opts.method,
                interval: rendezvous_interval_n(space, h, l, n, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r = rendezvous_interval(space, h, l)?;
    let a = average_interval(space, h, l)?;
    let unique_number = r.is_singleton_tol(singleton_tol(&r)).then(|| r.hi());
    Ok(RendezvousReport {
        H_label: h.to_string(),
        L_label: l.to_string(),
        R_n: r_n,
        R: r,
        A: a,
        unique_number,
    })
}

#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct RaComparison {
    pub R: ExtInterval,
    pub A: ExtInterval,
    pub equal: bool,
    /// `A ⊊ R` was observed.
    pub strict: bool,
    /// Both upper endpoints are infinite; the intervals agree only as sets in `[0, ∞]`.
    pub infinite_upper: bool,
    pub finite_kernel: bool,
}

/// Compares `R(H, L)` and `A(H, L)`. They must coincide on finite spaces with
/// finite-valued kernels; with an infinite diagonal `A ⊊ R` is reported when it occurs.
#[allow(non_snake_case)]
pub fn compare_R_A(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> Result<RaComparison> {
    let r = rendezvous_interval(space, h, l)?;
    let a = average_interval(space, h, l)?;
    let tol = singleton_tol(&r);
    let equal = r.approx_eq(&a, tol);
    Ok(RaComparison {
        R: r,
        A: a,
        equal,
        strict: !equal && a.is_subset_tol(&r, tol),
        infinite_upper: r.hi().is_infinite() && a.hi().is_infinite(),
        finite_kernel: space.is_finite_valued(),
    })
}
