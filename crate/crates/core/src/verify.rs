//! Property suites over generated finite instances.
//!
//! Every check compares computed quantities against an inequality or identity
//! that must hold on every finite instance; a failure is a solver defect and
//! its report carries the full instance spec for replay. For `|X| ≤ 4` an
//! independent brute-force path (simplex grid for measures, full tuple
//! enumeration for point systems) brackets the fast solvers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::confopt::{
    cheb_n, dual_cheb_n, multiset_count, nth_diameter, SearchOptions, DEFAULT_BUDGET,
};
use crate::energyopt::{energy_chain_check, w_energy};
use crate::error::{Error, Result};
use crate::ext::{ExtInterval, ExtendedValue};
use crate::game::{q_lower, q_value, u_value, v_value};
use crate::rendezvous::{
    average_interval, rendezvous_interval, rendezvous_interval_n, singleton_tol,
};
use crate::space::{build_interval_grid, DiscreteSpace, Kernel, SubsetRef};

/// Relative tolerance for inequalities between solver outputs.
pub const PROPERTY_TOL: f64 = 1e-8;
/// Simplex-grid resolution of the measure oracle.
pub const ORACLE_RES: usize = 200;
/// Largest space handed to the brute-force oracle.
pub const ORACLE_MAX_POINTS: usize = 4;
/// Largest `|H|` for which `v(H)` is enumerated inside the suite.
const V_SUITE_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    MetricRandom,
    PsdRandom,
    Discrete,
    Grid,
    InfiniteDiagonal,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::MetricRandom,
        KernelFamily::PsdRandom,
        KernelFamily::Discrete,
        KernelFamily::Grid,
        KernelFamily::InfiniteDiagonal,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetPolicy {
    Nested,
    Random,
    Full,
}

impl SubsetPolicy {
    pub const ALL: [SubsetPolicy; 3] = [
        SubsetPolicy::Nested,
        SubsetPolicy::Random,
        SubsetPolicy::Full,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub size: usize,
    pub kernel_family: KernelFamily,
    pub subset_policy: SubsetPolicy,
}

/// A generated space with its two subsets and a nested chain `C₀ ⊆ C₁ ⊆ C₂ = X`
/// for monotonicity checks.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub space: DiscreteSpace,
    pub h: SubsetRef,
    pub l: SubsetRef,
    pub chain: Vec<SubsetRef>,
}

fn ext(v: f64) -> ExtendedValue {
    ExtendedValue::finite(v).expect("generated kernel values are nonnegative")
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect()
}

fn matrix_space(
    label: String,
    n: usize,
    mut f: impl FnMut(usize, usize) -> ExtendedValue,
) -> Result<DiscreteSpace> {
    let mut m = vec![vec![ExtendedValue::ZERO; n]; n];
    for a in 0..n {
        for b in a..n {
            let v = f(a, b);
            m[a][b] = v;
            m[b][a] = v;
        }
    }
    DiscreteSpace::new(label, None, m)
}

fn nonempty_random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    if s.is_empty() {
        s.push(rng.random_range(0..n));
    }
    s
}

/// Random strictly nested `A ⊂ B ⊂ X` (as strict as the size allows).
fn nested_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (a, b) = if n >= 3 {
        let a = rng.random_range(1..=n - 2);
        (a, rng.random_range(a + 1..=n - 1))
    } else {
        (1, n)
    };
    (order[..a].to_vec(), order[..b].to_vec())
}

/// Deterministic instance generation: identical specs give identical instances.
pub fn gen_instance(spec: &InstanceSpec) -> Result<Instance> {
    if !(2..=64).contains(&spec.size) {
        return Err(Error::Argument(format!(
            "instance size {} outside [2, 64]",
            spec.size
        )));
    }
    let n = spec.size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let label = format!("{:?}/{}/{}", spec.kernel_family, n, spec.seed);
    let space = match spec.kernel_family {
        KernelFamily::MetricRandom => {
            DiscreteSpace::from_points(label, random_points(&mut rng, n), Kernel::Euclid)?
        }
        KernelFamily::PsdRandom => {
            // K = BᵀB / d with nonnegative B is PSD and nonnegative
            let d = n;
            let b: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect();
            matrix_space(label, n, |x, y| {
                ext((0..d).map(|r| b[r][x] * b[r][y]).sum::<f64>() / d as f64)
            })?
        }
        KernelFamily::Discrete => matrix_space(label, n, |x, y| {
            if x == y {
                ExtendedValue::ZERO
            } else {
                ext(1.0)
            }
        })?,
        KernelFamily::Grid => build_interval_grid(0.0, 1.0, n, Kernel::Euclid)?.relabeled(label),
        KernelFamily::InfiniteDiagonal => {
            let pts = random_points(&mut rng, n);
            matrix_space(label, n, |x, y| {
                if x == y {
                    ExtendedValue::INFINITY
                } else {
                    ext(((pts[x][0] - pts[y][0]).powi(2) + (pts[x][1] - pts[y][1]).powi(2)).sqrt())
                }
            })?
        }
    };
    let (h, l) = match spec.subset_policy {
        SubsetPolicy::Full => ((0..n).collect(), (0..n).collect()),
        SubsetPolicy::Nested => nested_pair(&mut rng, n),
        SubsetPolicy::Random => (
            nonempty_random_subset(&mut rng, n),
            nonempty_random_subset(&mut rng, n),
        ),
    };
    let (c0, c1) = nested_pair(&mut rng, n);
    Ok(Instance {
        spec: *spec,
        h: SubsetRef::new(h, n)?,
        l: SubsetRef::new(l, n)?,
        chain: vec![SubsetRef::new(c0, n)?, SubsetRef::new(c1, n)?, space.all()],
        space,
    })
}

// ---------------------------------------------------------------------------
// reports

fn ser_signed<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub instance: Option<InstanceSpec>,
    pub details: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub property_id: String,
    pub trials: usize,
    pub failures: Vec<Failure>,
    /// Largest relative violation seen (`≤ 0` means every comparison held
    /// with room to spare; `-inf` when nothing was compared).
    #[serde(serialize_with = "ser_signed")]
    pub worst_slack: f64,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn new(property_id: impl Into<String>, tolerance: f64) -> Self {
        PropertyReport {
            property_id: property_id.into(),
            trials: 1,
            failures: Vec::new(),
            worst_slack: f64::NEG_INFINITY,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, slack: f64, ok: bool, what: impl FnOnce() -> String) {
        if slack > self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
        }
        if !ok {
            self.failures.push(Failure {
                instance: None,
                details: what(),
            });
        }
    }

    /// Records `lhs ≤ rhs` up to the relative tolerance.
    fn le(&mut self, name: &str, lhs: ExtendedValue, rhs: ExtendedValue) {
        let scale = [lhs, rhs]
            .iter()
            .filter_map(|v| v.value())
            .fold(1.0f64, |a, v| a.max(v.abs()));
        let slack = lhs.signed_diff(rhs) / scale;
        let tol = self.tolerance;
        self.record(slack, slack <= tol, || format!("{name}: {lhs} > {rhs}"));
    }

    /// Records `|a − b| ≤ tol` (two infinities agree).
    fn eq(&mut self, name: &str, a: ExtendedValue, b: ExtendedValue) {
        let scale = [a, b]
            .iter()
            .filter_map(|v| v.value())
            .fold(1.0f64, |s, v| s.max(v.abs()));
        let slack = a.signed_diff(b).abs() / scale;
        let slack = if slack.is_nan() { 0.0 } else { slack };
        let tol = self.tolerance;
        self.record(slack, slack <= tol, || format!("{name}: {a} != {b}"));
    }

    /// Records `inner ⊆ outer` for intervals.
    fn subset(&mut self, name: &str, inner: &ExtInterval, outer: &ExtInterval) {
        let scale = [inner.lo(), inner.hi(), outer.lo(), outer.hi()]
            .iter()
            .filter_map(|v| v.value())
            .fold(1.0f64, |s, v| s.max(v.abs()));
        let ok = inner.is_subset_tol(outer, self.tolerance * scale);
        let slack = if inner.is_empty() {
            f64::NEG_INFINITY
        } else if outer.is_empty() {
            f64::INFINITY
        } else {
            outer
                .lo()
                .signed_diff(inner.lo())
                .max(inner.hi().signed_diff(outer.hi()))
                / scale
        };
        let slack = if slack.is_nan() { 0.0 } else { slack };
        self.record(slack, ok, || format!("{name}: {inner} not within {outer}"));
    }

    fn fail(&mut self, details: String) {
        self.record(f64::INFINITY, false, || details);
    }

    /// Folds another report for the same property into this one.
    pub fn merge(&mut self, other: PropertyReport) {
        self.trials += other.trials;
        self.failures.extend(other.failures);
        if other.worst_slack > self.worst_slack || other.worst_slack.is_nan() {
            self.worst_slack = other.worst_slack;
        }
    }

    fn tag(mut self, spec: &InstanceSpec) -> Self {
        for f in &mut self.failures {
            f.instance = Some(*spec);
        }
        self
    }
}

fn guard(report: &mut PropertyReport, what: &str, r: Result<()>) {
    if let Err(e) = r {
        report.fail(format!("{what}: {e}"));
    }
}

fn exact_fits(len: usize, n: usize) -> bool {
    multiset_count(len, n) <= DEFAULT_BUDGET
}

// ---------------------------------------------------------------------------
// checks

/// `q̲(H, L) ≤ q(L, H)` and, when `H ⊆ L`, `q̲(H, L) ≤ q(H, L)`.
pub fn check_chain(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> PropertyReport {
    let mut rep = PropertyReport::new("chain", PROPERTY_TOL);
    let r = (|| {
        let qbar_hl = q_lower(space, h, l)?.value;
        rep.le(
            "qlower(H,L) <= q(L,H)",
            qbar_hl,
            q_value(space, l, h)?.value,
        );
        if h.is_subset_of(l) {
            rep.le(
                "qlower(H,L) <= q(H,L) for H in L",
                qbar_hl,
                q_value(space, h, l)?.value,
            );
        }
        Ok(())
    })();
    guard(&mut rep, "chain", r);
    rep
}

/// `|q(H, L) − q̲(L, H)| ≤ 1e−8`.
pub fn check_duality(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> PropertyReport {
    let mut rep = PropertyReport::new("duality", PROPERTY_TOL);
    let r = (|| {
        let primal = q_value(space, h, l)?;
        let dual = q_lower(space, l, h)?;
        rep.eq("q(H,L) = qlower(L,H)", primal.value, dual.value);
        Ok(())
    })();
    guard(&mut rep, "duality", r);
    rep
}

/// `M_n(H, L) ≤ q̲(H, L)` and `M̄_n(H, L) ≥ q(H, L)` for exact `n ≤ n_max`.
#[allow(non_snake_case)]
pub fn check_MqL(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n_max: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::new("M_vs_qlower", PROPERTY_TOL);
    let r = (|| {
        let qbar = q_lower(space, h, l)?.value;
        let q = q_value(space, h, l)?.value;
        let ex = SearchOptions::exact();
        for n in (1..=n_max).filter(|&n| exact_fits(h.len(), n)) {
            rep.le(
                &format!("M_{n}(H,L) <= qlower(H,L)"),
                cheb_n(space, h, l, n, &ex)?.value,
                qbar,
            );
            rep.le(
                &format!("q(H,L) <= Mbar_{n}(H,L)"),
                q,
                dual_cheb_n(space, h, l, n, &ex)?.value,
            );
        }
        Ok(())
    })();
    guard(&mut rep, "M_vs_qlower", r);
    rep
}

/// `D_n(H) ≤ M_n(H) = M_n(H, H)` for exact `2 ≤ n ≤ n_max`.
pub fn check_dn_mn(space: &DiscreteSpace, h: &SubsetRef, n_max: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("D_vs_M", PROPERTY_TOL);
    let r = (|| {
        let ex = SearchOptions::exact();
        for n in (2..=n_max).filter(|&n| exact_fits(h.len(), n)) {
            let d = nth_diameter(space, h, n, &ex)?.value;
            let m = cheb_n(space, h, h, n, &ex)?.value;
            rep.le(&format!("D_{n}(H) <= M_{n}(H)"), d, m);
        }
        Ok(())
    })();
    guard(&mut rep, "D_vs_M", r);
    rep
}

/// Set-function monotonicity along `chain` (nested, increasing).
///
/// With `L` fixed, `H ↦ u, v, w, q(H,L), q̲(L,H), D_n(H), M_n(L,H)` are
/// non-increasing and `R_n(H,L), R(H,L), A(H,L)` shrink. With `H` fixed,
/// `L ↦ q(H,L), q̲(L,H), M_n(L,H)` are non-decreasing and the intervals grow.
pub fn check_monotone(
    space: &DiscreteSpace,
    chain: &[SubsetRef],
    fixed: &SubsetRef,
    n_max: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::new("monotone", PROPERTY_TOL);
    let r = (|| {
        for pair in chain.windows(2) {
            let (small, big) = (&pair[0], &pair[1]);
            if !small.is_subset_of(big) {
                return Err(Error::Argument(format!(
                    "chain is not nested: {small} vs {big}"
                )));
            }
            let l = fixed;
            rep.le(
                "u(H') <= u(H)",
                u_value(space, big)?.value,
                u_value(space, small)?.value,
            );
            if big.len() <= V_SUITE_LIMIT {
                rep.le(
                    "v(H') <= v(H)",
                    v_value(space, big, None)?.value,
                    v_value(space, small, None)?.value,
                );
            }
            rep.le(
                "w(H') <= w(H)",
                w_energy(space, big)?.value,
                w_energy(space, small)?.value,
            );
            rep.le(
                "q(H',L) <= q(H,L)",
                q_value(space, big, l)?.value,
                q_value(space, small, l)?.value,
            );
            rep.le(
                "qlower(L,H') <= qlower(L,H)",
                q_lower(space, l, big)?.value,
                q_lower(space, l, small)?.value,
            );
            rep.subset(
                "R(H',L) in R(H,L)",
                &rendezvous_interval(space, big, l)?,
                &rendezvous_interval(space, small, l)?,
            );
            rep.subset(
                "A(H',L) in A(H,L)",
                &average_interval(space, big, l)?,
                &average_interval(space, small, l)?,
            );

            let h = fixed;
            rep.le(
                "q(H,L) <= q(H,L')",
                q_value(space, h, small)?.value,
                q_value(space, h, big)?.value,
            );
            rep.le(
                "qlower(L,H) <= qlower(L',H)",
                q_lower(space, small, h)?.value,
                q_lower(space, big, h)?.value,
            );
            rep.subset(
                "R(H,L) in R(H,L')",
                &rendezvous_interval(space, h, small)?,
                &rendezvous_interval(space, h, big)?,
            );
            rep.subset(
                "A(H,L) in A(H,L')",
                &average_interval(space, h, small)?,
                &average_interval(space, h, big)?,
            );

            let ex = SearchOptions::exact();
            for n in 1..=n_max {
                if !exact_fits(big.len(), n) || !exact_fits(fixed.len(), n) {
                    continue;
                }
                if n >= 2 {
                    rep.le(
                        &format!("D_{n}(H') <= D_{n}(H)"),
                        nth_diameter(space, big, n, &ex)?.value,
                        nth_diameter(space, small, n, &ex)?.value,
                    );
                }
                rep.le(
                    &format!("M_{n}(L,H') <= M_{n}(L,H)"),
                    cheb_n(space, l, big, n, &ex)?.value,
                    cheb_n(space, l, small, n, &ex)?.value,
                );
                rep.le(
                    &format!("M_{n}(L,H) <= M_{n}(L',H)"),
                    cheb_n(space, small, h, n, &ex)?.value,
                    cheb_n(space, big, h, n, &ex)?.value,
                );
                rep.subset(
                    &format!("R_{n}(H',L) in R_{n}(H,L)"),
                    &rendezvous_interval_n(space, big, l, n, &ex)?,
                    &rendezvous_interval_n(space, small, l, n, &ex)?,
                );
                rep.subset(
                    &format!("R_{n}(H,L) in R_{n}(H,L')"),
                    &rendezvous_interval_n(space, h, small, n, &ex)?,
                    &rendezvous_interval_n(space, h, big, n, &ex)?,
                );
            }
        }
        Ok(())
    })();
    guard(&mut rep, "monotone", r);
    rep
}

/// `w ≤ v ≤ q ≤ u` on `H`.
pub fn check_energy_chain(space: &DiscreteSpace, h: &SubsetRef) -> PropertyReport {
    let mut rep = PropertyReport::new("energy_chain", PROPERTY_TOL);
    let r = (|| {
        let chain = energy_chain_check(space, h)?;
        rep.le("w <= q", chain.w, chain.q);
        rep.le("q <= u", chain.q, chain.u);
        if let Some(v) = chain.v {
            rep.le("w <= v", chain.w, v);
            rep.le("v <= q", v, chain.q);
        }
        Ok(())
    })();
    guard(&mut rep, "energy_chain", r);
    rep
}

/// `A(X, X)` is a singleton, equal to `R(X, X)` for finite-valued kernels,
/// and contained in every computed `R_n(X, X)`.
pub fn check_uniqueness(space: &DiscreteSpace, n_max: usize) -> PropertyReport {
    let mut rep = PropertyReport::new("uniqueness", PROPERTY_TOL);
    let r = (|| {
        let all = space.all();
        let a = average_interval(space, &all, &all)?;
        if !a.is_singleton_tol(singleton_tol(&a)) {
            rep.fail(format!("A(X) = {a} is not a singleton"));
        } else {
            rep.record(0.0, true, String::new);
        }
        if space.is_finite_valued() {
            let r = rendezvous_interval(space, &all, &all)?;
            rep.eq("R(X) lower = A(X) lower", r.lo(), a.lo());
            rep.eq("R(X) upper = A(X) upper", r.hi(), a.hi());
        }
        let ex = SearchOptions::exact();
        for n in (1..=n_max).filter(|&n| exact_fits(all.len(), n)) {
            rep.subset(
                &format!("A(X) in R_{n}(X)"),
                &a,
                &rendezvous_interval_n(space, &all, &all, n, &ex)?,
            );
        }
        Ok(())
    })();
    guard(&mut rep, "uniqueness", r);
    rep
}

// ---------------------------------------------------------------------------
// brute-force oracle

/// Simplex-grid estimates over `Δ(H)` at resolution `1/res`:
/// `(min_μ max_L U^μ, max_μ min_L U^μ, min_μ W(μ))`.
pub fn grid_oracle(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    res: usize,
) -> (ExtendedValue, ExtendedValue, ExtendedValue) {
    let hs = h.indices();
    let m = hs.len();
    let mut counts = vec![0usize; m];
    let mut best = (
        ExtendedValue::INFINITY,
        ExtendedValue::ZERO,
        ExtendedValue::INFINITY,
    );
    let mut first = true;
    // enumerate compositions of res into m parts
    counts[m - 1] = res;
    loop {
        let pot = |x: usize| {
            hs.iter()
                .zip(&counts)
                .fold(ExtendedValue::ZERO, |acc, (&y, &c)| {
                    acc.add(space.k(x, y).scale(c as f64 / res as f64))
                })
        };
        let on_l: Vec<ExtendedValue> = l.indices().iter().map(|&x| pot(x)).collect();
        let hi = *on_l.iter().max().unwrap();
        let lo = *on_l.iter().min().unwrap();
        let w = hs
            .iter()
            .zip(&counts)
            .fold(ExtendedValue::ZERO, |acc, (&y, &c)| {
                acc.add(pot(y).scale(c as f64 / res as f64))
            });
        if first {
            best = (hi, lo, w);
            first = false;
        } else {
            best = (best.0.min(hi), best.1.max(lo), best.2.min(w));
        }
        // next composition: move one unit leftwards in reverse-lex order
        let Some(j) = (0..m - 1)
            .rev()
            .find(|&j| counts[j + 1..].iter().sum::<usize>() > 0)
        else {
            break;
        };
        let tail: usize = counts[j + 1..].iter().sum();
        counts[j] += 1;
        for c in &mut counts[j + 1..] {
            *c = 0;
        }
        counts[m - 1] = tail - 1;
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TupleQuantity {
    Diameter,
    Chebyshev,
    DualChebyshev,
}

/// Every ordered `n`-tuple of `H`, objective evaluated from scratch.
pub fn tuple_oracle(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n: usize,
    q: TupleQuantity,
) -> ExtendedValue {
    let hs = h.indices();
    let mut idx = vec![0usize; n];
    let mut best: Option<ExtendedValue> = None;
    loop {
        let w: Vec<usize> = idx.iter().map(|&i| hs[i]).collect();
        let v = match q {
            TupleQuantity::Diameter => {
                let mut s = ExtendedValue::ZERO;
                for a in 0..n {
                    for b in a + 1..n {
                        s = s.add(space.k(w[a], w[b]));
                    }
                }
                s.scale(2.0 / (n * (n - 1)) as f64)
            }
            _ => {
                let vals = l.indices().iter().map(|&x| {
                    w.iter()
                        .fold(ExtendedValue::ZERO, |acc, &y| acc.add(space.k(x, y)))
                        .scale(1.0 / n as f64)
                });
                if q == TupleQuantity::Chebyshev {
                    vals.min().unwrap()
                } else {
                    vals.max().unwrap()
                }
            }
        };
        best = Some(match (best, q) {
            (None, _) => v,
            (Some(b), TupleQuantity::Chebyshev) => b.max(v),
            (Some(b), _) => b.min(v),
        });
        let mut k = 0;
        loop {
            if k == n {
                return best.unwrap();
            }
            idx[k] += 1;
            if idx[k] < hs.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Fast paths against the brute-force oracle; requires `|X| ≤ 4`.
pub fn check_oracle(
    space: &DiscreteSpace,
    h: &SubsetRef,
    l: &SubsetRef,
    n_max: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::new("oracle", PROPERTY_TOL);
    if space.n_points() > ORACLE_MAX_POINTS {
        rep.fail(format!(
            "oracle needs |X| <= {ORACLE_MAX_POINTS}, got {}",
            space.n_points()
        ));
        return rep;
    }
    let bracket = ext(2.0 / ORACLE_RES as f64 * space.max_finite_entry());
    let r = (|| {
        let (q_grid, qbar_grid, w_grid) = grid_oracle(space, h, l, ORACLE_RES);
        let q = q_value(space, h, l)?.value;
        let qbar = q_lower(space, h, l)?.value;
        let w = w_energy(space, h)?.value;
        // the grid is a subset of the simplex: one side is exact, the other bracketed
        rep.le("q <= grid", q, q_grid);
        rep.le("grid <= q + bracket", q_grid, q.add(bracket));
        rep.le("grid <= qlower", qbar_grid, qbar);
        rep.le("qlower <= grid + bracket", qbar, qbar_grid.add(bracket));
        rep.le("w <= grid", w, w_grid);
        rep.le("grid <= w + bracket", w_grid, w.add(bracket));

        let ex = SearchOptions::exact();
        for n in 1..=n_max {
            if n >= 2 {
                rep.eq(
                    &format!("D_{n}"),
                    nth_diameter(space, h, n, &ex)?.value,
                    tuple_oracle(space, h, l, n, TupleQuantity::Diameter),
                );
            }
            rep.eq(
                &format!("M_{n}"),
                cheb_n(space, h, l, n, &ex)?.value,
                tuple_oracle(space, h, l, n, TupleQuantity::Chebyshev),
            );
            rep.eq(
                &format!("Mbar_{n}"),
                dual_cheb_n(space, h, l, n, &ex)?.value,
                tuple_oracle(space, h, l, n, TupleQuantity::DualChebyshev),
            );
        }
        Ok(())
    })();
    guard(&mut rep, "oracle", r);
    rep
}

// ---------------------------------------------------------------------------
// suite

fn default_trials() -> usize {
    200
}
fn default_sizes() -> (usize, usize) {
    (2, 8)
}
fn default_exhaustive_n() -> usize {
    3
}
fn default_infinite_trials() -> usize {
    50
}
fn default_families() -> Vec<KernelFamily> {
    vec![
        KernelFamily::MetricRandom,
        KernelFamily::PsdRandom,
        KernelFamily::Discrete,
        KernelFamily::Grid,
    ]
}
fn default_policies() -> Vec<SubsetPolicy> {
    SubsetPolicy::ALL.to_vec()
}
fn default_true() -> bool {
    true
}

/// Suite configuration (JSON). Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    /// Instances drawn from `families`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Extra instances from the infinite-diagonal family.
    #[serde(default = "default_infinite_trials")]
    pub infinite_trials: usize,
    /// Inclusive size range.
    #[serde(default = "default_sizes")]
    pub sizes: (usize, usize),
    #[serde(default = "default_families")]
    pub families: Vec<KernelFamily>,
    #[serde(default = "default_policies")]
    pub policies: Vec<SubsetPolicy>,
    /// Largest `n` for exact point-system checks.
    #[serde(default = "default_exhaustive_n")]
    pub exhaustive_n: usize,
    /// Run the brute-force oracle on instances with `|X| ≤ 4`.
    #[serde(default = "default_true")]
    pub oracle: bool,
    /// Restrict to these property ids (all when absent).
    #[serde(default)]
    pub properties: Option<Vec<String>>,
    /// Adds this amount to `q(H, L)` in the duality check; exercises the
    /// failure path of the harness.
    #[serde(default)]
    pub inject_fault: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Argument(format!("suite config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sizes;
        if lo < 2 || hi > 64 || lo > hi {
            return Err(Error::Argument(format!(
                "sizes ({lo}, {hi}) must satisfy 2 <= lo <= hi <= 64"
            )));
        }
        if self.families.is_empty() && self.trials > 0 {
            return Err(Error::Argument("families must not be empty".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Argument("policies must not be empty".into()));
        }
        if let Some(props) = &self.properties {
            if let Some(bad) = props.iter().find(|p| !PROPERTY_IDS.contains(&p.as_str())) {
                return Err(Error::Argument(format!("unknown property {bad:?}")));
            }
        }
        if !self.inject_fault.is_finite() {
            return Err(Error::Argument("inject_fault must be finite".into()));
        }
        Ok(())
    }

    /// The instance schedule: `trials` regular instances then the infinite-diagonal batch.
    pub fn schedule(&self) -> Vec<InstanceSpec> {
        let (lo, hi) = self.sizes;
        let span = hi - lo + 1;
        let mut out = Vec::with_capacity(self.trials + self.infinite_trials);
        let mut push = |i: usize, family: KernelFamily| {
            let policy = self.policies[(i / self.families.len().max(1)) % self.policies.len()];
            out.push(InstanceSpec {
                seed: self.seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                size: lo + (i * 7 + i / span) % span,
                kernel_family: family,
                subset_policy: policy,
            });
        };
        for i in 0..self.trials {
            push(i, self.families[i % self.families.len()]);
        }
        for i in 0..self.infinite_trials {
            push(self.trials + i, KernelFamily::InfiniteDiagonal);
        }
        out
    }
}

pub const PROPERTY_IDS: [&str; 8] = [
    "chain",
    "duality",
    "M_vs_qlower",
    "D_vs_M",
    "monotone",
    "energy_chain",
    "uniqueness",
    "oracle",
];

/// One JSON-lines record: a property evaluated on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub schema: u32,
    pub instance: InstanceSpec,
    #[serde(flatten)]
    pub report: PropertyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub records: Vec<Record>,
    pub reports: Vec<PropertyReport>,
}

impl SuiteOutcome {
    pub fn failures(&self) -> usize {
        self.reports.iter().map(|r| r.failures.len()).sum()
    }

    /// `0` when every property held, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures() > 0)
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Every enabled property on one instance.
pub fn run_instance(inst: &Instance, cfg: &SuiteConfig) -> Vec<PropertyReport> {
    let want = |id: &str| {
        cfg.properties
            .as_ref()
            .is_none_or(|p| p.iter().any(|x| x == id))
    };
    let (space, h, l) = (&inst.space, &inst.h, &inst.l);
    let mut out = Vec::new();
    if want("chain") {
        out.push(check_chain(space, h, l));
    }
    if want("duality") {
        let mut rep = check_duality(space, h, l);
        if cfg.inject_fault != 0.0 {
            let r = (|| {
                let q = q_value(space, h, l)?.value.add(ext(cfg.inject_fault.abs()));
                rep.eq(
                    "q(H,L) + fault = qlower(L,H)",
                    q,
                    q_lower(space, l, h)?.value,
                );
                Ok(())
            })();
            guard(&mut rep, "duality", r);
        }
        out.push(rep);
    }
    if want("M_vs_qlower") {
        out.push(check_MqL(space, h, l, cfg.exhaustive_n));
    }
    if want("D_vs_M") {
        out.push(check_dn_mn(space, h, cfg.exhaustive_n.max(2)));
    }
    if want("monotone") {
        out.push(check_monotone(space, &inst.chain, l, cfg.exhaustive_n));
    }
    if want("energy_chain") {
        out.push(check_energy_chain(space, h));
    }
    if want("uniqueness") {
        out.push(check_uniqueness(space, cfg.exhaustive_n));
    }
    if want("oracle") && cfg.oracle && space.n_points() <= ORACLE_MAX_POINTS {
        out.push(check_oracle(space, h, l, cfg.exhaustive_n.min(3)));
    }
    out.into_iter().map(|r| r.tag(&inst.spec)).collect()
}

/// Runs the configured schedule in parallel; results are merged by property
/// id, then by schedule order, independent of thread count.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let schedule = cfg.schedule();
    let per_instance: Vec<Vec<PropertyReport>> = schedule
        .par_iter()
        .map(|spec| gen_instance(spec).map(|inst| run_instance(&inst, cfg)))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut reports: Vec<PropertyReport> = Vec::new();
    for id in PROPERTY_IDS {
        let mut agg: Option<PropertyReport> = None;
        for (spec, reps) in schedule.iter().zip(&per_instance) {
            for rep in reps.iter().filter(|r| r.property_id == id) {
                records.push(Record {
                    schema: crate::SCHEMA_VERSION,
                    instance: *spec,
                    report: rep.clone(),
                });
                match &mut agg {
                    Some(a) => a.merge(rep.clone()),
                    None => agg = Some(rep.clone()),
                }
            }
        }
        reports.extend(agg);
    }
    Ok(SuiteOutcome { records, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(
        seed: u64,
        size: usize,
        kernel_family: KernelFamily,
        subset_policy: SubsetPolicy,
    ) -> InstanceSpec {
        InstanceSpec {
            seed,
            size,
            kernel_family,
            subset_policy,
        }
    }

    #[test]
    fn two_point_discrete_instance() {
        let inst = gen_instance(&spec(1, 2, KernelFamily::Discrete, SubsetPolicy::Full)).unwrap();
        assert_eq!(
            inst.space.matrix(),
            crate::space::discrete_two_point().matrix()
        );
        assert_eq!(inst.h.len(), 2);
        assert_eq!(inst.l.len(), 2);
    }

    #[test]
    fn nested_policy_gives_strict_chain() {
        let inst = gen_instance(&spec(
            5,
            4,
            KernelFamily::MetricRandom,
            SubsetPolicy::Nested,
        ))
        .unwrap();
        assert!(inst.h.is_subset_of(&inst.l));
        assert!(inst.h.len() < inst.l.len() && inst.l.len() < 4);
        assert!(
            inst.chain[0].is_subset_of(&inst.chain[1])
                && inst.chain[1].is_subset_of(&inst.chain[2])
        );
    }

    #[test]
    fn generation_is_deterministic() {
        for family in KernelFamily::ALL {
            let s = spec(77, 6, family, SubsetPolicy::Random);
            let a = gen_instance(&s).unwrap();
            let b = gen_instance(&s).unwrap();
            assert_eq!(a.space, b.space);
            assert_eq!((a.h, a.l), (b.h, b.l));
        }
        assert!(gen_instance(&spec(0, 1, KernelFamily::Grid, SubsetPolicy::Full)).is_err());
        assert!(gen_instance(&spec(0, 65, KernelFamily::Grid, SubsetPolicy::Full)).is_err());
    }

    #[test]
    fn psd_family_is_positive_semidefinite() {
        let inst = gen_instance(&spec(3, 6, KernelFamily::PsdRandom, SubsetPolicy::Full)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut q = 0.0;
            for a in 0..6 {
                for b in 0..6 {
                    q += x[a] * x[b] * inst.space.k(a, b).to_f64();
                }
            }
            assert!(q >= -1e-12);
        }
    }

    #[test]
    fn two_point_checks_pass() {
        let s = crate::space::discrete_two_point();
        let all = s.all();
        for rep in [
            check_chain(&s, &all, &all),
            check_duality(&s, &all, &all),
            check_MqL(&s, &all, &all, 3),
            check_dn_mn(&s, &all, 3),
            check_uniqueness(&s, 3),
            check_oracle(&s, &all, &all, 3),
            check_energy_chain(&s, &all),
        ] {
            assert!(rep.passed(), "{rep:?}");
        }
        let a = SubsetRef::singleton(0, 2).unwrap();
        let rep = check_monotone(&s, &[a.clone(), all.clone()], &all, 3);
        assert!(rep.passed(), "{rep:?}");
        let trivial = check_monotone(&s, &[a.clone(), a.clone(), a], &all, 2);
        assert!(trivial.passed());
    }

    #[test]
    fn grid_oracle_on_known_values() {
        let s = crate::space::discrete_two_point();
        let (q, qbar, w) = grid_oracle(&s, &s.all(), &s.all(), 200);
        assert_eq!(q, ext(0.5));
        assert_eq!(qbar, ext(0.5));
        assert_eq!(w, ExtendedValue::ZERO);
        let g = build_interval_grid(0.0, 1.0, 3, Kernel::Euclid).unwrap();
        let (q, _, _) = grid_oracle(&g, &g.all(), &g.all(), 200);
        assert!((q.to_f64() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_suite_is_clean_and_deterministic() {
        let cfg = SuiteConfig {
            trials: 12,
            infinite_trials: 4,
            sizes: (2, 5),
            ..SuiteConfig::default()
        };
        let a = run_suite(&cfg).unwrap();
        assert_eq!(
            a.exit_code(),
            0,
            "{:?}",
            a.reports.iter().filter(|r| !r.passed()).collect::<Vec<_>>()
        );
        let b = run_suite(&cfg).unwrap();
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        a.write_jsonl(&mut ja).unwrap();
        b.write_jsonl(&mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.reports.len(), PROPERTY_IDS.len());
    }

    #[test]
    fn injected_fault_is_reported() {
        let cfg = SuiteConfig {
            trials: 3,
            infinite_trials: 0,
            properties: Some(vec!["duality".into()]),
            inject_fault: 0.1,
            ..SuiteConfig::default()
        };
        let out = run_suite(&cfg).unwrap();
        assert_eq!(out.exit_code(), 1);
        let f = &out.reports[0].failures[0];
        assert!(f.instance.is_some());
    }

    #[test]
    fn schedule_covers_sizes_families_and_policies() {
        let cfg = SuiteConfig::default();
        let sched = cfg.schedule();
        assert_eq!(sched.len(), 250);
        for size in 2..=8 {
            for family in KernelFamily::ALL {
                assert!(
                    sched
                        .iter()
                        .any(|s| s.size == size && s.kernel_family == family),
                    "{size} {family:?}"
                );
            }
        }
        for policy in SubsetPolicy::ALL {
            assert!(sched.iter().any(|s| s.subset_policy == policy));
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        assert!(SuiteConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg = SuiteConfig::from_json(r#"{"sizes": [1, 4]}"#).unwrap();
        assert!(run_suite(&cfg).is_err());
        let cfg = SuiteConfig::from_json(r#"{"properties": ["nope"]}"#).unwrap();
        assert!(cfg.validate().is_err());
    }
}
