//! Wiener energy `w(H) = min_{μ ∈ Δ(H)} μᵀKμ`, energy-minimizing measures and
//! the chain and maximum-principle checks built on them.
//!
//! The quadratic form is not convex for general kernels, so small problems are
//! solved exactly by enumerating faces of the simplex (every minimizer is a
//! stationary point of the face it lies in). Larger problems use away-step
//! Frank–Wolfe from several starts; the reported gap then certifies
//! stationarity, and global optimality only when `K` is positive semidefinite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::ext::ExtendedValue;
use crate::game::{q_value, u_value, v_value, V_EXACT_LIMIT};
use crate::measure::{energy, potentials, ProbabilityMeasure};
use crate::space::{DiscreteSpace, SubsetRef};

/// Largest candidate set solved by exhaustive face enumeration.
pub const FACE_ENUM_LIMIT: usize = 12;
/// Largest candidate set whose maximal ∞-free subsets are enumerated.
pub const CLIQUE_ENUM_LIMIT: usize = 20;
pub const MAX_ITERATIONS: usize = 100_000;
const REL_GAP: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EnergyResult {
    pub value: ExtendedValue,
    pub minimizer: ProbabilityMeasure,
    pub iterations: usize,
    /// `W(μ) − min U^μ` over points of `H` where the potential is finite.
    pub certificate_gap: f64,
}

impl Serialize for EnergyResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EnergyResult", 4)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("weights", self.minimizer.weights())?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("gap", &self.certificate_gap)?;
        st.end()
    }
}

/// Dense finite block of the kernel on a candidate list.
struct Block {
    idx: Vec<usize>,
    k: Vec<f64>,
}

impl Block {
    fn new(space: &DiscreteSpace, idx: Vec<usize>) -> Self {
        let m = idx.len();
        let mut k = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                k[a * m + b] = space.k(idx[a], idx[b]).value().expect("finite block");
            }
        }
        Block { idx, k }
    }

    fn m(&self) -> usize {
        self.idx.len()
    }

    fn at(&self, a: usize, b: usize) -> f64 {
        self.k[a * self.m() + b]
    }

    fn quad(&self, x: &[f64]) -> f64 {
        let m = self.m();
        let mut s = 0.0;
        for a in 0..m {
            if x[a] == 0.0 {
                continue;
            }
            let row = &self.k[a * m..(a + 1) * m];
            s += x[a] * row.iter().zip(x).map(|(k, w)| k * w).sum::<f64>();
        }
        s
    }

    fn times(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|a| {
                self.k[a * m..(a + 1) * m]
                    .iter()
                    .zip(x)
                    .map(|(k, w)| k * w)
                    .sum()
            })
            .collect()
    }
}

/// `w(H)` with a minimizing measure.
pub fn w_energy(space: &DiscreteSpace, h: &SubsetRef) -> Result<EnergyResult> {
    h.require_nonempty("H")?;
    h.check_in(space)?;
    let h0: Vec<usize> = h
        .indices()
        .iter()
        .copied()
        .filter(|&y| space.k(y, y).is_finite())
        .collect();
    if h0.is_empty() {
        // every atom carries infinite self-energy
        let mu = ProbabilityMeasure::uniform_on(space, h)?;
        return Ok(EnergyResult {
            value: ExtendedValue::INFINITY,
            minimizer: mu,
            iterations: 0,
            certificate_gap: 0.0,
        });
    }

    let has_inf = h0
        .iter()
        .any(|&a| h0.iter().any(|&b| space.k(a, b).is_infinite()));
    let (weights, iterations) = if h0.len() <= FACE_ENUM_LIMIT {
        face_enumeration(space, &h0)
    } else {
        let groups = if !has_inf {
            vec![h0.clone()]
        } else if h0.len() <= CLIQUE_ENUM_LIMIT {
            maximal_finite_cliques(space, &h0)
        } else {
            greedy_finite_cliques(space, &h0)
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut total_iters = 0;
        for group in groups {
            let block = Block::new(space, group);
            let (x, it) = multistart_fw(&block);
            total_iters += it;
            let val = block.quad(&x);
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                let mut full = vec![0.0; space.n_points()];
                for (&i, &w) in block.idx.iter().zip(&x) {
                    full[i] = w;
                }
                best = Some((val, full));
            }
        }
        (best.expect("non-empty H0").1, total_iters)
    };

    let minimizer = ProbabilityMeasure::from_raw(space, weights);
    let value = energy(space, &minimizer)?;
    let pots = potentials(space, &minimizer)?;
    let min_pot = h
        .indices()
        .iter()
        .filter_map(|&y| pots[y].value())
        .fold(f64::INFINITY, f64::min);
    let certificate_gap = match value.value() {
        Some(w) if min_pot.is_finite() => (w - min_pot).max(0.0),
        _ => 0.0,
    };
    Ok(EnergyResult {
        value,
        minimizer,
        iterations,
        certificate_gap,
    })
}

// ---------------------------------------------------------------------------
// exact: stationary points of every face

fn face_enumeration(space: &DiscreteSpace, h0: &[usize]) -> (Vec<f64>, usize) {
    let m = h0.len();
    let block_all: Vec<Vec<bool>> = h0
        .iter()
        .map(|&a| h0.iter().map(|&b| space.k(a, b).is_finite()).collect())
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut solved = 0;
    for mask in 1u32..(1u32 << m) {
        let members: Vec<usize> = (0..m).filter(|&a| mask & (1 << a) != 0).collect();
        let compatible = members
            .iter()
            .all(|&a| members.iter().all(|&b| block_all[a][b]));
        if !compatible {
            continue;
        }
        let idx: Vec<usize> = members.iter().map(|&a| h0[a]).collect();
        let block = Block::new(space, idx);
        solved += 1;
        let Some(x) = face_stationary_point(&block) else {
            continue;
        };
        let val = block.quad(&x);
        if best
            .as_ref()
            .is_none_or(|(b, _)| val < *b - 1e-15 * b.abs().max(1.0))
        {
            let mut full = vec![0.0; space.n_points()];
            for (&i, &w) in block.idx.iter().zip(&x) {
                full[i] = w;
            }
            best = Some((val, full));
        }
    }
    (best.expect("singleton faces always qualify").1, solved)
}

/// Solves `[K 1; 1ᵀ 0] [x; λ] = [0; 1]` and keeps `x` when it lies in the simplex.
fn face_stationary_point(block: &Block) -> Option<Vec<f64>> {
    let m = block.m();
    if m == 1 {
        return Some(vec![1.0]);
    }
    let dim = m + 1;
    let mut a = vec![0.0; dim * (dim + 1)];
    let w = dim + 1;
    for r in 0..m {
        for c in 0..m {
            a[r * w + c] = block.at(r, c);
        }
        a[r * w + m] = 1.0;
        a[m * w + r] = 1.0;
    }
    a[m * w + dim] = 1.0;
    let scale = block.k.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&p, &q| a[p * w + col].abs().total_cmp(&a[q * w + col].abs()))
            .unwrap();
        if a[piv * w + col].abs() <= 1e-11 * scale {
            return None;
        }
        if piv != col {
            for c in 0..w {
                a.swap(piv * w + c, col * w + c);
            }
        }
        let p = a[col * w + col];
        for r in 0..dim {
            if r == col {
                continue;
            }
            let factor = a[r * w + col] / p;
            if factor != 0.0 {
                for c in col..w {
                    a[r * w + c] -= factor * a[col * w + c];
                }
            }
        }
    }
    let x: Vec<f64> = (0..m).map(|r| a[r * w + dim] / a[r * w + r]).collect();
    if x.iter().any(|&v| !(v > -1e-12)) {
        return None;
    }
    let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(x.into_iter().map(|v| v / total).collect())
}

// ---------------------------------------------------------------------------
// away-step Frank–Wolfe

fn multistart_fw(block: &Block) -> (Vec<f64>, usize) {
    let m = block.m();
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / m as f64; m]];
    let mut by_diag: Vec<usize> = (0..m).collect();
    by_diag.sort_by(|&a, &b| block.at(a, a).total_cmp(&block.at(b, b)).then(a.cmp(&b)));
    for &v in by_diag.iter().take(4) {
        let mut x = vec![0.0; m];
        x[v] = 1.0;
        starts.push(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..4 {
        starts.push(dirichlet(&mut rng, m));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iters = 0;
    for s in starts {
        let (x, it) = away_step_fw(block, s);
        iters += it;
        let val = block.quad(&x);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, x));
        }
    }
    (best.unwrap().1, iters)
}

fn dirichlet(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn away_step_fw(block: &Block, mut x: Vec<f64>) -> (Vec<f64>, usize) {
    let m = block.m();
    let mut kx = block.times(&x);
    for it in 0..MAX_ITERATIONS {
        if it % 256 == 255 {
            kx = block.times(&x);
        }
        let f: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        // gradient is 2Kx; smallest index wins ties
        let mut s = 0;
        for a in 1..m {
            if kx[a] < kx[s] {
                s = a;
            }
        }
        let mut v = usize::MAX;
        for a in 0..m {
            if x[a] > 0.0 && (v == usize::MAX || kx[a] > kx[v]) {
                v = a;
            }
        }
        let fw_gap = f - kx[s];
        let away_gap = kx[v] - f;
        if fw_gap <= REL_GAP * f.abs().max(1e-300) || fw_gap <= 0.0 {
            return (x, it);
        }
        // direction d, slope g·d / 2, curvature dᵀKd, step cap
        let (to_fw, slope, curv, cap) = if fw_gap >= away_gap {
            (true, kx[s] - f, block.at(s, s) - 2.0 * kx[s] + f, 1.0)
        } else {
            let cap = if x[v] >= 1.0 {
                f64::INFINITY
            } else {
                x[v] / (1.0 - x[v])
            };
            (false, f - kx[v], f - 2.0 * kx[v] + block.at(v, v), cap)
        };
        if slope >= 0.0 {
            return (x, it);
        }
        let gamma = if curv > 0.0 {
            (-slope / curv).min(cap)
        } else {
            cap
        };
        if !gamma.is_finite() || gamma <= 0.0 {
            return (x, it);
        }
        if to_fw {
            for a in 0..m {
                x[a] *= 1.0 - gamma;
                kx[a] = (1.0 - gamma) * kx[a] + gamma * block.at(a, s);
            }
            x[s] += gamma;
        } else {
            for a in 0..m {
                x[a] *= 1.0 + gamma;
                kx[a] = (1.0 + gamma) * kx[a] - gamma * block.at(a, v);
            }
            x[v] -= gamma;
            if gamma == cap {
                x[v] = 0.0;
            }
        }
        for w in &mut x {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }
    (x, MAX_ITERATIONS)
}

// ---------------------------------------------------------------------------
// supports free of infinite pairs

fn maximal_finite_cliques(space: &DiscreteSpace, h0: &[usize]) -> Vec<Vec<usize>> {
    let m = h0.len();
    let adj: Vec<u32> = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| b != a && space.k(h0[a], h0[b]).is_finite())
                .fold(0u32, |acc, b| acc | (1 << b))
        })
        .collect();
    let mut out = Vec::new();
    bron_kerbosch(&adj, 0, (1u32 << m) - 1, 0, &mut out);
    out.sort();
    out.into_iter()
        .map(|mask| {
            (0..m)
                .filter(|&a| mask & (1 << a) != 0)
                .map(|a| h0[a])
                .collect()
        })
        .collect()
}

fn bron_kerbosch(adj: &[u32], r: u32, mut p: u32, mut x: u32, out: &mut Vec<u32>) {
    if p == 0 && x == 0 {
        out.push(r);
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        cand &= cand - 1;
        bron_kerbosch(adj, r | (1 << v), p & adj[v], x & adj[v], out);
        p &= !(1 << v);
        x |= 1 << v;
    }
}

/// Greedy maximal ∞-free subsets grown from the lowest-diagonal points.
fn greedy_finite_cliques(space: &DiscreteSpace, h0: &[usize]) -> Vec<Vec<usize>> {
    let mut seeds = h0.to_vec();
    seeds.sort_by(|&a, &b| space.k(a, a).cmp(&space.k(b, b)).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &seed in seeds.iter().take(16) {
        let mut clique = vec![seed];
        for &c in h0 {
            if c != seed && clique.iter().all(|&m| space.k(c, m).is_finite()) {
                clique.push(c);
            }
        }
        clique.sort_unstable();
        if !out.contains(&clique) {
            out.push(clique);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: ExtendedValue,
    pub rhs: ExtendedValue,
    pub pass: bool,
}

impl InequalityCheck {
    pub fn new(name: impl Into<String>, lhs: ExtendedValue, rhs: ExtendedValue, tol: f64) -> Self {
        let scale = rhs.value().map_or(1.0, |v| v.abs().max(1.0));
        InequalityCheck {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs.le_tol(rhs, tol * scale),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub w: ExtendedValue,
    pub v: Option<ExtendedValue>,
    pub q: ExtendedValue,
    pub u: ExtendedValue,
    pub checks: Vec<InequalityCheck>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Tolerance for energy inequalities.
pub const CHAIN_TOL: f64 = 1e-8;

/// Computes `w(H)`, `v(H)` (when `|H|` permits exact enumeration),
/// `q(H) = q(H, H)` and `u(H)`, and checks `w ≤ v ≤ q ≤ u` and `w ≤ q`.
pub fn energy_chain_check(space: &DiscreteSpace, h: &SubsetRef) -> Result<ChainReport> {
    let w = w_energy(space, h)?.value;
    let q = q_value(space, h, h)?.value;
    let u = u_value(space, h)?.value;
    let v = if h.len() <= V_EXACT_LIMIT.min(12) {
        Some(v_value(space, h, None)?.value)
    } else {
        None
    };
    let mut checks = vec![
        InequalityCheck::new("w <= q", w, q, CHAIN_TOL),
        InequalityCheck::new("q <= u", q, u, CHAIN_TOL),
    ];
    if let Some(v) = v {
        checks.push(InequalityCheck::new("w <= v", w, v, CHAIN_TOL));
        checks.push(InequalityCheck::new("v <= q", v, q, CHAIN_TOL));
    }
    Ok(ChainReport { w, v, q, u, checks })
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrincipleReport {
    pub holds: bool,
    pub samples: usize,
    /// Largest `sup_X U^μ − max_{supp μ} U^μ` seen; `None` when every sampled
    /// measure had infinite potential on its own support.
    pub worst_violation: Option<ExtendedValue>,
    /// Measure weights and the point where the worst violation occurred.
    pub witness: Option<(Vec<f64>, usize)>,
}

/// Samples every Dirac measure plus `samples` sparse Dirichlet measures and
/// checks `U^μ(x) ≤ max_{y ∈ supp μ} U^μ(y)` for all `x`. Passing is evidence
/// only; a violation is a genuine counterexample.
pub fn max_principle_check(
    space: &DiscreteSpace,
    samples: usize,
    seed: u64,
) -> Result<MaxPrincipleReport> {
    let n = space.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut measures: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut w = vec![0.0; n];
            w[i] = 1.0;
            w
        })
        .collect();
    for _ in 0..samples {
        let size = rng.random_range(1..=n);
        let mut pts: Vec<usize> = (0..n).collect();
        for i in 0..size {
            let j = rng.random_range(i..n);
            pts.swap(i, j);
        }
        let weights = dirichlet(&mut rng, size);
        let mut w = vec![0.0; n];
        for (&p, &x) in pts[..size].iter().zip(&weights) {
            w[p] = x;
        }
        measures.push(w);
    }

    let scale = space.max_finite_entry().max(1.0);
    let mut holds = true;
    let mut worst: Option<(ExtendedValue, f64, Vec<f64>, usize)> = None;
    let total = measures.len();
    for w in measures {
        let mu = ProbabilityMeasure::from_raw(space, w);
        let pots = potentials(space, &mu)?;
        let on_support = mu.support().into_iter().map(|y| pots[y]).max().unwrap();
        if on_support.is_infinite() {
            continue;
        }
        let (x, top) =
            pots.iter()
                .enumerate()
                .fold((0, ExtendedValue::ZERO), |(bi, b), (i, &p)| {
                    if p > b {
                        (i, p)
                    } else {
                        (bi, b)
                    }
                });
        let excess = top.signed_diff(on_support);
        if excess > 1e-12 * scale {
            holds = false;
        }
        // magnitude as an extended value (negative excess reports as zero)
        let mag = if top.is_infinite() {
            ExtendedValue::INFINITY
        } else {
            ExtendedValue::finite(excess.max(0.0))?
        };
        if worst.as_ref().is_none_or(|(_, e, _, _)| excess > *e) {
            worst = Some((mag, excess, mu.weights().to_vec(), x));
        }
    }
    Ok(MaxPrincipleReport {
        holds,
        samples: total,
        worst_violation: worst.as_ref().map(|w| w.0),
        witness: worst.filter(|w| w.1 > 1e-12 * scale).map(|w| (w.2, w.3)),
    })
}
