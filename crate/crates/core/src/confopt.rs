//! Extremal `n`-point configurations: `n`-th diameters, Chebyshev constants
//! and their duals, with limit bracketing for quasi-monotone sequences.
//!
//! Point systems are multisets (repetitions allowed). `Exact` enumerates all
//! multisets in lexicographic order with branch-and-bound pruning, so the
//! reported witness is the lexicographically first optimum. `LocalSearch` runs
//! first-improvement single-point exchange from seeded restarts and only
//! claims a one-sided bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{make_interval, ExtAccumulator, ExtInterval, ExtendedValue};
use crate::game::{q_lower, q_value};
use crate::space::{DiscreteSpace, SubsetRef};

/// Default cap on the number of multisets visited by exact enumeration.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    LocalSearch,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "local" | "local-search" => Ok(Method::LocalSearch),
            other => Err(Error::Argument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub method: Method,
    pub restarts: usize,
    pub seed: u64,
    pub budget: u128,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            method: Method::Exact,
            restarts: 32,
            seed: 0,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SearchOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn local(seed: u64) -> Self {
        SearchOptions {
            method: Method::LocalSearch,
            seed,
            ..Self::default()
        }
    }
}

/// Which configurational quantity a witness belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// `D_n(H)`, minimized average pair interaction
    Diameter,
    /// `M_n(H, L)`, maximized lower envelope
    Chebyshev,
    /// `M̄_n(H, L)`, minimized upper envelope
    DualChebyshev,
}

impl Quantity {
    fn minimizes(self) -> bool {
        !matches!(self, Quantity::Chebyshev)
    }
}

/// An optimal (or best found) point system.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TupleWitness {
    pub n: usize,
    pub value: ExtendedValue,
    /// Sorted point indices; repeated indices are repeated points.
    pub points: Vec<usize>,
    pub method: Method,
    #[serde(skip)]
    pub quantity: Quantity,
}

impl TupleWitness {
    /// How this value relates to the true quantity.
    pub fn term_kind(&self) -> TermKind {
        match (self.method, self.quantity.minimizes()) {
            (Method::Exact, _) => TermKind::Exact,
            (Method::LocalSearch, true) => TermKind::UpperBound,
            (Method::LocalSearch, false) => TermKind::LowerBound,
        }
    }

    pub fn term(&self) -> SequenceTerm {
        SequenceTerm {
            n: self.n,
            value: self.value,
            kind: self.term_kind(),
        }
    }
}

struct Problem<'a> {
    space: &'a DiscreteSpace,
    quantity: Quantity,
    cand: &'a [usize],
    l: &'a [usize],
    n: usize,
}

impl Problem<'_> {
    /// Objective value of a complete point system.
    fn evaluate(&self, pts: &[usize]) -> ExtendedValue {
        match self.quantity {
            Quantity::Diameter => {
                let mut acc = ExtAccumulator::default();
                for j in 0..pts.len() {
                    for l in j + 1..pts.len() {
                        acc.add(self.space.k(pts[j], pts[l]));
                    }
                }
                acc.mean(pair_count(self.n))
            }
            Quantity::Chebyshev | Quantity::DualChebyshev => {
                let sums = self.l.iter().map(|&x| {
                    let mut acc = ExtAccumulator::default();
                    for &w in pts {
                        acc.add(self.space.k(x, w));
                    }
                    acc.mean(self.n as f64)
                });
                if self.quantity == Quantity::Chebyshev {
                    sums.min().expect("non-empty L")
                } else {
                    sums.max().expect("non-empty L")
                }
            }
        }
    }

    fn tol(&self, best: ExtendedValue) -> f64 {
        1e-12 * best.value().map_or(1.0, |v| v.abs().max(1.0))
    }

    /// True when `new` beats `best` by more than the comparison tolerance.
    fn improves(&self, new: ExtendedValue, best: ExtendedValue) -> bool {
        let tol = self.tol(best);
        if self.quantity.minimizes() {
            match (new.value(), best.value()) {
                (_, None) => new.is_finite(),
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a < b - tol,
            }
        } else {
            match (new.value(), best.value()) {
                (None, _) => best.is_finite(),
                (Some(_), None) => false,
                (Some(a), Some(b)) => a > b + tol,
            }
        }
    }

    fn worst(&self) -> ExtendedValue {
        if self.quantity.minimizes() {
            ExtendedValue::INFINITY
        } else {
            ExtendedValue::ZERO
        }
    }
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

/// `C(m + n − 1, n)`, saturating.
pub fn multiset_count(m: usize, n: usize) -> u128 {
    if m == 0 {
        return 0;
    }
    let mut acc: u128 = 1;
    let top = (m + n - 1) as u128;
    let k = n.min(m - 1) as u128;
    for i in 0..k {
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn solve(problem: &Problem<'_>, opts: &SearchOptions) -> Result<TupleWitness> {
    let (points, method) = match opts.method {
        Method::Exact => {
            let needed = multiset_count(problem.cand.len(), problem.n);
            if needed > opts.budget {
                return Err(Error::Budget {
                    what: format!(
                        "{:?} with n = {} over {} candidate points",
                        problem.quantity,
                        problem.n,
                        problem.cand.len()
                    ),
                    needed,
                    limit: opts.budget,
                });
            }
            (exact_search(problem), Method::Exact)
        }
        Method::LocalSearch => (local_search(problem, opts), Method::LocalSearch),
    };
    let mut points = points;
    points.sort_unstable();
    Ok(TupleWitness {
        n: problem.n,
        value: problem.evaluate(&points),
        points,
        method,
        quantity: problem.quantity,
    })
}

// ---------------------------------------------------------------------------
// exact enumeration

struct Dfs<'p, 'a> {
    p: &'p Problem<'a>,
    // per depth, per x ∈ L (Chebyshev variants only)
    sums: Vec<Vec<ExtAccumulator>>,
    // max / min over candidates of k(x, ·), per x ∈ L
    row_max: Vec<ExtendedValue>,
    row_min: Vec<ExtendedValue>,
    stack: Vec<usize>,
    best: ExtendedValue,
    best_pts: Vec<usize>,
}

fn exact_search(p: &Problem<'_>) -> Vec<usize> {
    let (row_max, row_min) =
        p.l.iter()
            .map(|&x| {
                let vals = p.cand.iter().map(|&c| p.space.k(x, c));
                (vals.clone().max().unwrap(), vals.min().unwrap())
            })
            .unzip();
    let mut dfs = Dfs {
        p,
        sums: vec![vec![ExtAccumulator::default(); p.l.len()]; p.n + 1],
        row_max,
        row_min,
        stack: Vec::with_capacity(p.n),
        best: p.worst(),
        best_pts: Vec::new(),
    };
    dfs.descend(0, 0, ExtAccumulator::default());
    if dfs.best_pts.is_empty() {
        // every system is equally bad; take the first one
        dfs.best_pts = vec![p.cand[0]; p.n];
    }
    dfs.best_pts
}

impl Dfs<'_, '_> {
    fn descend(&mut self, depth: usize, start: usize, pair: ExtAccumulator) {
        let p = self.p;
        if depth == p.n {
            let value = match p.quantity {
                Quantity::Diameter => pair.mean(pair_count(p.n)),
                Quantity::Chebyshev => self.sums[depth]
                    .iter()
                    .map(|a| a.mean(p.n as f64))
                    .min()
                    .unwrap(),
                Quantity::DualChebyshev => self.sums[depth]
                    .iter()
                    .map(|a| a.mean(p.n as f64))
                    .max()
                    .unwrap(),
            };
            if self.best_pts.is_empty() && value == self.best || p.improves(value, self.best) {
                self.best = value;
                self.best_pts = self.stack.clone();
            }
            return;
        }
        if !self.best_pts.is_empty() && self.prune(depth, &pair) {
            return;
        }
        for ci in start..p.cand.len() {
            let c = p.cand[ci];
            let mut next_pair = pair;
            if p.quantity == Quantity::Diameter {
                for &w in &self.stack {
                    next_pair.add(p.space.k(c, w));
                }
            } else {
                let (head, tail) = self.sums.split_at_mut(depth + 1);
                for ((dst, src), &x) in tail[0].iter_mut().zip(&head[depth]).zip(p.l) {
                    *dst = *src;
                    dst.add(p.space.k(x, c));
                }
            }
            self.stack.push(c);
            self.descend(depth + 1, ci, next_pair);
            self.stack.pop();
        }
    }

    /// True when no completion of the current prefix can be accepted.
    fn prune(&self, depth: usize, pair: &ExtAccumulator) -> bool {
        let p = self.p;
        let remaining = (p.n - depth) as f64;
        match p.quantity {
            Quantity::Diameter => {
                // kernel values are nonnegative, so the partial sum is a lower bound
                let partial = pair.mean(pair_count(p.n));
                !p.improves(partial, self.best)
            }
            Quantity::Chebyshev => {
                let bound = self.sums[depth]
                    .iter()
                    .zip(&self.row_max)
                    .map(|(acc, &m)| {
                        let mut a = *acc;
                        a.add(m.scale(remaining));
                        a.mean(p.n as f64)
                    })
                    .min()
                    .unwrap();
                !p.improves(bound, self.best)
            }
            Quantity::DualChebyshev => {
                let bound = self.sums[depth]
                    .iter()
                    .zip(&self.row_min)
                    .map(|(acc, &m)| {
                        let mut a = *acc;
                        a.add(m.scale(remaining));
                        a.mean(p.n as f64)
                    })
                    .max()
                    .unwrap();
                !p.improves(bound, self.best)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// exchange local search

/// Incrementally maintained objective of the current point system.
struct State<'p, 'a> {
    p: &'p Problem<'a>,
    pts: Vec<usize>,
    pair: ExtAccumulator,
    sums: Vec<ExtAccumulator>,
}

impl<'p, 'a> State<'p, 'a> {
    fn new(p: &'p Problem<'a>, pts: Vec<usize>) -> Self {
        let mut s = State {
            p,
            pts,
            pair: ExtAccumulator::default(),
            sums: vec![ExtAccumulator::default(); p.l.len()],
        };
        s.rebuild();
        s
    }

    fn rebuild(&mut self) {
        let p = self.p;
        self.pair = ExtAccumulator::default();
        for s in &mut self.sums {
            *s = ExtAccumulator::default();
        }
        match p.quantity {
            Quantity::Diameter => {
                for j in 0..self.pts.len() {
                    for l in j + 1..self.pts.len() {
                        self.pair.add(p.space.k(self.pts[j], self.pts[l]));
                    }
                }
            }
            _ => {
                for (acc, &x) in self.sums.iter_mut().zip(p.l) {
                    for &w in &self.pts {
                        acc.add(p.space.k(x, w));
                    }
                }
            }
        }
    }

    fn value(&self) -> ExtendedValue {
        self.value_with(usize::MAX, 0)
    }

    /// Objective after replacing position `j` by point `c` (`j = usize::MAX`: no change).
    fn value_with(&self, j: usize, c: usize) -> ExtendedValue {
        let p = self.p;
        let n = p.n as f64;
        match p.quantity {
            Quantity::Diameter => {
                let mut acc = self.pair;
                if j != usize::MAX {
                    let old = self.pts[j];
                    for (l, &w) in self.pts.iter().enumerate() {
                        if l != j {
                            acc.remove(p.space.k(old, w));
                            acc.add(p.space.k(c, w));
                        }
                    }
                }
                acc.mean(pair_count(p.n))
            }
            q => {
                let vals = self.sums.iter().zip(p.l).map(|(acc, &x)| {
                    let mut a = *acc;
                    if j != usize::MAX {
                        a.remove(p.space.k(x, self.pts[j]));
                        a.add(p.space.k(x, c));
                    }
                    a.mean(n)
                });
                if q == Quantity::Chebyshev {
                    vals.min().unwrap()
                } else {
                    vals.max().unwrap()
                }
            }
        }
    }

    fn replace(&mut self, j: usize, c: usize) {
        self.pts[j] = c;
        // rebuilding keeps removal drift from accumulating
        self.rebuild();
    }
}

const MAX_SWEEPS: usize = 10_000;

fn descend(state: &mut State<'_, '_>) {
    let p = state.p;
    let mut current = state.value();
    for _ in 0..MAX_SWEEPS {
        let mut improved = false;
        for j in 0..p.n {
            for &c in p.cand {
                if c == state.pts[j] {
                    continue;
                }
                let v = state.value_with(j, c);
                if p.improves(v, current) {
                    state.replace(j, c);
                    current = state.value();
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Greedy build-up: each new point optimizes the objective of the partial system.
fn greedy_start(p: &Problem<'_>) -> Vec<usize> {
    let mut pts = vec![p.cand[0]];
    while pts.len() < p.n {
        let mut best: Option<(ExtendedValue, usize)> = None;
        for &c in p.cand {
            let v = match p.quantity {
                Quantity::Diameter => {
                    let mut acc = ExtAccumulator::default();
                    for &w in &pts {
                        acc.add(p.space.k(c, w));
                    }
                    acc.total()
                }
                q => {
                    let vals = p.l.iter().map(|&x| {
                        let mut acc = ExtAccumulator::default();
                        for &w in pts.iter().chain(std::iter::once(&c)) {
                            acc.add(p.space.k(x, w));
                        }
                        acc.total()
                    });
                    if q == Quantity::Chebyshev {
                        vals.min().unwrap()
                    } else {
                        vals.max().unwrap()
                    }
                }
            };
            if best.is_none_or(|(b, _)| p.improves(v, b)) {
                best = Some((v, c));
            }
        }
        pts.push(best.unwrap().1);
    }
    pts
}

fn local_search(p: &Problem<'_>, opts: &SearchOptions) -> Vec<usize> {
    let restarts = opts.restarts.max(1);
    let results: Vec<(ExtendedValue, Vec<usize>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                greedy_start(p)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                (0..p.n)
                    .map(|_| p.cand[rng.random_range(0..p.cand.len())])
                    .collect()
            };
            let mut state = State::new(p, start);
            descend(&mut state);
            let mut pts = state.pts;
            pts.sort_unstable();
            (p.evaluate(&pts), pts)
        })
        .collect();
    let mut best = results[0].clone();
    for (v, pts) in results.into_iter().skip(1) {
        let tie = !p.improves(v, best.0) && !p.improves(best.0, v);
        if p.improves(v, best.0) || (tie && pts < best.1) {
            best = (v, pts);
        }
    }
    best.1
}

// ---------------------------------------------------------------------------
// public operations

fn check_subset(space: &DiscreteSpace, s: &SubsetRef, name: &str) -> Result<()> {
    s.require_nonempty(name)?;
    s.check_in(space)
}

/// `D_n(H) = min over w ∈ Hⁿ of (2 / (n(n−1))) Σ_{j<l} k(w_j, w_l)`.
pub fn nth_diameter(
    space: &DiscreteSpace,
    h: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
) -> Result<TupleWitness> {
    check_subset(space, h, "H")?;
    if n < 2 {
        return Err(Error::Argument(format!(
            "the n-th diameter needs n >= 2, got {n}"
        )));
    }
    let problem = Problem {
        space,
        quantity: Quantity::Diameter,
        cand: h.indices(),
        l: &[],
        n,
    };
    solve(&problem, opts)
}

/// `M_n(H, L) = max over w ∈ Hⁿ of min_{x ∈ L} (1/n) Σ_j k(x, w_j)`.
pub fn cheb_n(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
) -> Result<TupleWitness> {
    envelope(space, h, l, n, opts, Quantity::Chebyshev)
}

/// `M̄_n(H, L) = min over w ∈ Hⁿ of max_{x ∈ L} (1/n) Σ_j k(x, w_j)`.
pub fn dual_cheb_n(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
) -> Result<TupleWitness> {
    envelope(space, h, l, n, opts, Quantity::DualChebyshev)
}

/// `C_n(H) = M_n(X, H)`: points range over the whole space, values are taken on `H`.
pub fn modified_cheb_n(
    space: &DiscreteSpace,
    h: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
) -> Result<TupleWitness> {
    cheb_n(space, &space.all(), h, n, opts)
}

fn envelope(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n: usize,
    opts: &SearchOptions,
    quantity: Quantity,
) -> Result<TupleWitness> {
    check_subset(space, h, "H")?;
    check_subset(space, l, "L")?;
    if n < 1 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let problem = Problem {
        space,
        quantity,
        cand: h.indices(),
        l: l.indices(),
        n,
    };
    solve(&problem, opts)
}

/// The Chebyshev limits `(M(H, L), M̄(H, L))` read off the game values
/// `(q̲(H, L), q(H, L))`, which they equal on finite spaces.
pub fn cheb_limits_via_games(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
) -> Result<(ExtendedValue, ExtendedValue)> {
    Ok((q_lower(space, h, l)?.value, q_value(space, h, l)?.value))
}

// ---------------------------------------------------------------------------
// limits of quasi-monotone sequences

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `(n+m) s_{n+m} ≥ n s_n + m s_m`; the limit is the supremum
    Increasing,
    /// `(n+m) s_{n+m} ≤ n s_n + m s_m`; the limit is the infimum
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Exact,
    /// the true term is at least this value
    LowerBound,
    /// the true term is at most this value
    UpperBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceTerm {
    pub n: usize,
    pub value: ExtendedValue,
    pub kind: TermKind,
}

/// Recorded terms of a quasi-monotone sequence plus an optional external bound
/// on the limit (upper bound when increasing, lower bound when decreasing).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceEstimate {
    pub direction: Direction,
    pub terms: Vec<SequenceTerm>,
    pub bound: Option<ExtendedValue>,
}

impl SequenceEstimate {
    pub fn new(
        direction: Direction,
        terms: Vec<SequenceTerm>,
        bound: Option<ExtendedValue>,
    ) -> Self {
        SequenceEstimate {
            direction,
            terms,
            bound,
        }
    }

    /// Largest `n` such that every term `1..=n` is recorded exactly.
    pub fn exact_terms_upto(&self) -> usize {
        let mut n = 0;
        while self.exact(n + 1).is_some() {
            n += 1;
        }
        n
    }

    fn exact(&self, n: usize) -> Option<ExtendedValue> {
        self.terms
            .iter()
            .find(|t| t.n == n && t.kind == TermKind::Exact)
            .map(|t| t.value)
    }

    /// Worst quasi-monotonicity residual over recorded exact pairs, signed so
    /// that negative means violated. `None` when no pair is available.
    pub fn worst_residual(&self) -> Option<f64> {
        let exact: Vec<(usize, ExtendedValue)> = self
            .terms
            .iter()
            .filter(|t| t.kind == TermKind::Exact)
            .map(|t| (t.n, t.value))
            .collect();
        let mut worst: Option<f64> = None;
        for &(n, sn) in &exact {
            for &(m, sm) in &exact {
                if m < n {
                    continue;
                }
                let Some(snm) = self.exact(n + m) else {
                    continue;
                };
                let lhs = snm.scale((n + m) as f64);
                let rhs = sn.scale(n as f64).add(sm.scale(m as f64));
                let r = match self.direction {
                    Direction::Increasing => lhs.signed_diff(rhs),
                    Direction::Decreasing => rhs.signed_diff(lhs),
                };
                worst = Some(worst.map_or(r, |w: f64| w.min(r)));
            }
        }
        worst
    }
}

/// Brackets the limit of a quasi-monotone sequence by its running sup (or inf)
/// and the external bound. No extrapolation is attempted.
pub fn fekete_limit(seq: &SequenceEstimate) -> Result<ExtInterval> {
    if seq.terms.len() < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 recorded terms, got {}",
            seq.terms.len()
        )));
    }
    let scale = seq
        .terms
        .iter()
        .filter_map(|t| t.value.value())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale;
    if let Some(r) = seq.worst_residual() {
        if r < -tol * 10.0 {
            return Err(Error::Data(format!(
                "terms violate {:?} quasi-monotonicity by {}",
                seq.direction, -r
            )));
        }
    }
    let bracket = match seq.direction {
        Direction::Increasing => {
            let lo = seq
                .terms
                .iter()
                .filter(|t| t.kind != TermKind::UpperBound)
                .map(|t| t.value)
                .max()
                .unwrap_or(ExtendedValue::ZERO);
            make_interval(lo, seq.bound.unwrap_or(ExtendedValue::INFINITY))
        }
        Direction::Decreasing => {
            let hi = seq
                .terms
                .iter()
                .filter(|t| t.kind != TermKind::LowerBound)
                .map(|t| t.value)
                .min()
                .unwrap_or(ExtendedValue::INFINITY);
            make_interval(seq.bound.unwrap_or(ExtendedValue::ZERO), hi)
        }
    };
    if bracket.is_empty() && !bracket.lo().le_tol(bracket.hi(), tol) {
        return Err(Error::Data(format!(
            "recorded terms cross the supplied bound: {} vs {}",
            bracket.lo(),
            bracket.hi()
        )));
    }
    if bracket.is_empty() {
        // within tolerance: collapse onto the bound
        return Ok(make_interval(bracket.hi(), bracket.hi()));
    }
    Ok(bracket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_interval_grid, discrete_two_point, Kernel};

    fn f(v: f64) -> ExtendedValue {
        ExtendedValue::finite(v).unwrap()
    }

    /// Independent oracle: every ordered n-tuple, objective recomputed from scratch.
    fn brute(space: &DiscreteSpace, h: &[usize], l: &[usize], n: usize, q: Quantity) -> f64 {
        let mut idx = vec![0usize; n];
        let mut best = if q.minimizes() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        loop {
            let w: Vec<usize> = idx.iter().map(|&i| h[i]).collect();
            let v = match q {
                Quantity::Diameter => {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in a + 1..n {
                            s += space.k(w[a], w[b]).to_f64();
                        }
                    }
                    2.0 * s / (n * (n - 1)) as f64
                }
                _ => {
                    let vals = l.iter().map(|&x| {
                        w.iter().map(|&y| space.k(x, y).to_f64()).sum::<f64>() / n as f64
                    });
                    if q == Quantity::Chebyshev {
                        vals.fold(f64::INFINITY, f64::min)
                    } else {
                        vals.fold(f64::NEG_INFINITY, f64::max)
                    }
                }
            };
            best = if q.minimizes() {
                best.min(v)
            } else {
                best.max(v)
            };
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                idx[k] += 1;
                if idx[k] < h.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn diameter_examples() {
        let s = discrete_two_point();
        let d2 = nth_diameter(&s, &s.all(), 2, &SearchOptions::exact()).unwrap();
        assert_eq!(d2.value, ExtendedValue::ZERO);
        assert_eq!(d2.points, vec![0, 0]);

        let g = build_interval_grid(0.0, 1.0, 257, Kernel::NegLog).unwrap();
        let d2 = nth_diameter(&g, &g.all(), 2, &SearchOptions::exact()).unwrap();
        assert_eq!(d2.value, ExtendedValue::ZERO);
        assert_eq!(d2.points, vec![0, 256]);
    }

    #[test]
    fn neglog_three_point_diameter() {
        // oracle: optimum over grid triples is {0, 1/2, 1}
        let g = build_interval_grid(0.0, 1.0, 257, Kernel::NegLog).unwrap();
        let want = 4f64.ln() / 3.0;
        let mut oracle = f64::INFINITY;
        for a in 0..257 {
            for b in a + 1..257 {
                for c in b + 1..257 {
                    let v = (g.k(a, b).to_f64() + g.k(a, c).to_f64() + g.k(b, c).to_f64()) / 3.0;
                    oracle = oracle.min(v);
                }
            }
        }
        assert!((oracle - want).abs() < 1e-12);
        let opts = SearchOptions {
            budget: 3_000_000,
            ..SearchOptions::exact()
        };
        let d3 = nth_diameter(&g, &g.all(), 3, &opts).unwrap();
        assert!((d3.value.to_f64() - oracle).abs() < 1e-12);
        assert_eq!(d3.points, vec![0, 128, 256]);
        let ls = nth_diameter(&g, &g.all(), 3, &SearchOptions::local(1)).unwrap();
        assert!((ls.value.to_f64() - oracle).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let g = build_interval_grid(0.0, 1.0, 257, Kernel::NegLog).unwrap();
        let err = nth_diameter(&g, &g.all(), 3, &SearchOptions::exact()).unwrap_err();
        match err {
            Error::Budget { needed, limit, .. } => {
                assert_eq!(needed, 259 * 258 * 257 / 6);
                assert_eq!(limit, DEFAULT_BUDGET);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn chebyshev_examples_on_euclid_grid() {
        let g = build_interval_grid(0.0, 1.0, 101, Kernel::Euclid).unwrap();
        let all = g.all();
        let ex = SearchOptions::exact();
        assert_eq!(
            cheb_n(&g, &all, &all, 1, &ex).unwrap().value,
            ExtendedValue::ZERO
        );
        let m2 = cheb_n(&g, &all, &all, 2, &ex).unwrap();
        assert!((m2.value.to_f64() - 0.5).abs() < 1e-12);
        assert_eq!(m2.points, vec![0, 100]);

        let mb1 = dual_cheb_n(&g, &all, &all, 1, &ex).unwrap();
        assert!((mb1.value.to_f64() - 0.5).abs() < 1e-12);
        assert_eq!(mb1.points, vec![50]);
        let mb2 = dual_cheb_n(&g, &all, &all, 2, &ex).unwrap();
        assert!((mb2.value.to_f64() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dual_chebyshev_infinite_on_neglog() {
        let g = build_interval_grid(0.0, 1.0, 9, Kernel::NegLog).unwrap();
        let all = g.all();
        for n in 1..=3 {
            let mb = dual_cheb_n(&g, &all, &all, n, &SearchOptions::exact()).unwrap();
            assert_eq!(mb.value, ExtendedValue::INFINITY);
            let m = cheb_n(&g, &all, &all, n, &SearchOptions::exact()).unwrap();
            assert!(m.value.is_finite());
        }
        // once every point is charged, the lower envelope is infinite too
        let m9 = cheb_n(&g, &all, &all, 9, &SearchOptions::exact()).unwrap();
        assert_eq!(m9.value, ExtendedValue::INFINITY);
    }

    #[test]
    fn modified_chebyshev_examples() {
        let s = discrete_two_point();
        let a = SubsetRef::singleton(0, 2).unwrap();
        let c1 = modified_cheb_n(&s, &a, 1, &SearchOptions::exact()).unwrap();
        assert_eq!(c1.value, f(1.0));
        assert_eq!(c1.points, vec![1]);
        let m1 = cheb_n(&s, &s.all(), &s.all(), 1, &SearchOptions::exact()).unwrap();
        assert_eq!(m1.value, ExtendedValue::ZERO);

        let g = build_interval_grid(0.0, 1.0, 11, Kernel::Euclid).unwrap();
        let c1 = modified_cheb_n(&g, &g.all(), 1, &SearchOptions::exact()).unwrap();
        assert_eq!(c1.value, ExtendedValue::ZERO);
    }

    #[test]
    fn exact_matches_tuple_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n_pts = rng.random_range(2..6);
            let pts: Vec<Vec<f64>> = (0..n_pts)
                .map(|_| vec![rng.random(), rng.random()])
                .collect();
            let s = DiscreteSpace::from_points("r", pts, Kernel::Euclid).unwrap();
            let h: Vec<usize> = (0..n_pts).filter(|_| rng.random_bool(0.7)).collect();
            let h = if h.is_empty() { vec![0] } else { h };
            let l: Vec<usize> = (0..n_pts).filter(|_| rng.random_bool(0.7)).collect();
            let l = if l.is_empty() { vec![n_pts - 1] } else { l };
            let hs = SubsetRef::new(h.clone(), n_pts).unwrap();
            let ls = SubsetRef::new(l.clone(), n_pts).unwrap();
            for n in 1..=3 {
                let ex = SearchOptions::exact();
                let m = cheb_n(&s, &hs, &ls, n, &ex).unwrap().value.to_f64();
                assert!(
                    (m - brute(&s, &h, &l, n, Quantity::Chebyshev)).abs() < 1e-12,
                    "trial {trial}"
                );
                let mb = dual_cheb_n(&s, &hs, &ls, n, &ex).unwrap().value.to_f64();
                assert!((mb - brute(&s, &h, &l, n, Quantity::DualChebyshev)).abs() < 1e-12);
                if n >= 2 {
                    let d = nth_diameter(&s, &hs, n, &ex).unwrap().value.to_f64();
                    assert!((d - brute(&s, &h, &l, n, Quantity::Diameter)).abs() < 1e-12);
                }
                // heuristics are one-sided
                let ls_m = cheb_n(&s, &hs, &ls, n, &SearchOptions::local(trial))
                    .unwrap()
                    .value
                    .to_f64();
                assert!(ls_m <= m + 1e-12);
                let ls_mb = dual_cheb_n(&s, &hs, &ls, n, &SearchOptions::local(trial))
                    .unwrap()
                    .value
                    .to_f64();
                assert!(ls_mb >= mb - 1e-12);
            }
        }
    }

    #[test]
    fn witness_self_check() {
        let g = build_interval_grid(0.0, 1.0, 17, Kernel::NegLog).unwrap();
        let w = nth_diameter(&g, &g.all(), 5, &SearchOptions::local(3)).unwrap();
        let again = Problem {
            space: &g,
            quantity: Quantity::Diameter,
            cand: g.all().indices(),
            l: &[],
            n: 5,
        }
        .evaluate(&w.points);
        assert_eq!(w.value, again);
        assert_eq!(w.term_kind(), TermKind::UpperBound);
    }

    #[test]
    fn local_search_is_deterministic() {
        let g = build_interval_grid(0.0, 1.0, 65, Kernel::NegLog).unwrap();
        let a = nth_diameter(&g, &g.all(), 7, &SearchOptions::local(42)).unwrap();
        let b = nth_diameter(&g, &g.all(), 7, &SearchOptions::local(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn limits_via_games() {
        let s = discrete_two_point();
        let (m, mb) = cheb_limits_via_games(&s, &s.all(), &s.all()).unwrap();
        assert!((m.to_f64() - 0.5).abs() < 1e-12 && (mb.to_f64() - 0.5).abs() < 1e-12);

        let g = build_interval_grid(0.0, 1.0, 101, Kernel::Euclid).unwrap();
        let (m, mb) = cheb_limits_via_games(&g, &g.all(), &g.all()).unwrap();
        assert!((m.to_f64() - 0.5).abs() < 1e-9 && (mb.to_f64() - 0.5).abs() < 1e-9);

        let l = build_interval_grid(0.0, 1.0, 9, Kernel::NegLog).unwrap();
        let (m, mb) = cheb_limits_via_games(&l, &l.all(), &l.all()).unwrap();
        assert_eq!((m, mb), (ExtendedValue::INFINITY, ExtendedValue::INFINITY));
    }

    #[test]
    fn fekete_brackets() {
        let t = |n, v| SequenceTerm {
            n,
            value: f(v),
            kind: TermKind::Exact,
        };
        let constant = SequenceEstimate::new(
            Direction::Increasing,
            vec![t(1, 2.0), t(2, 2.0), t(3, 2.0)],
            Some(f(2.0)),
        );
        let b = fekete_limit(&constant).unwrap();
        assert!(b.is_singleton_tol(0.0) && b.contains(f(2.0)));

        let d = SequenceEstimate::new(
            Direction::Increasing,
            vec![t(2, 0.0), t(3, 4f64.ln() / 3.0), t(4, 0.6)],
            Some(f(4f64.ln())),
        );
        let b = fekete_limit(&d).unwrap();
        assert_eq!((b.lo(), b.hi()), (f(0.6), f(4f64.ln())));

        let bad = SequenceEstimate::new(
            Direction::Increasing,
            vec![t(1, 1.0), t(2, 0.2), t(3, 1.0)],
            None,
        );
        assert!(matches!(fekete_limit(&bad), Err(Error::Data(_))));

        let short = SequenceEstimate::new(Direction::Decreasing, vec![t(1, 1.0)], None);
        assert!(fekete_limit(&short).is_err());

        let dec = SequenceEstimate::new(
            Direction::Decreasing,
            vec![t(1, 0.5), t(2, 0.5), t(3, 0.5)],
            Some(f(0.5)),
        );
        assert!(fekete_limit(&dec).unwrap().is_singleton_tol(0.0));
    }

    #[test]
    fn chebyshev_terms_are_superadditive() {
        let g = build_interval_grid(0.0, 1.0, 21, Kernel::Euclid).unwrap();
        let terms: Vec<SequenceTerm> = (1..=4)
            .map(|n| {
                cheb_n(&g, &g.all(), &g.all(), n, &SearchOptions::exact())
                    .unwrap()
                    .term()
            })
            .collect();
        let q = q_lower(&g, &g.all(), &g.all()).unwrap().value;
        let seq = SequenceEstimate::new(Direction::Increasing, terms, Some(q));
        assert!(seq.worst_residual().unwrap() >= -1e-12);
        assert_eq!(seq.exact_terms_upto(), 4);
        let b = fekete_limit(&seq).unwrap();
        assert!((b.lo().to_f64() - 0.5).abs() < 1e-9 && (b.hi().to_f64() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multiset_count(2, 2), 3);
        assert_eq!(multiset_count(257, 3), 2_862_209);
        assert_eq!(multiset_count(5, 1), 5);
        assert_eq!(multiset_count(1, 10), 1);
    }
}
