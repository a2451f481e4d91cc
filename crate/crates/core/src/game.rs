//! Min–max and max–min energies of pairs of subsets, computed as finite
//! zero-sum games with duality certificates.
//!
//! * `q(H, L)  = min_{μ ∈ Δ(H)} max_{x ∈ L} U^μ(x)`
//! * `q̲(H, L) = sup_{ν ∈ Δ(H)} min_{x ∈ L} U^ν(x)`
//!
//! Infinite kernel entries are handled exactly. A row of `H` that meets an
//! infinite entry in `L` is never worth any mass for the minimizer, so it is
//! dropped. For the maximizer, an arbitrarily small mass on such a row drives
//! the matching column to `+∞`; those columns are dropped from the inner
//! minimum and the strategy is perturbed by a vanishing uniform component.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ext::{ExtendedValue, DEFAULT_TOL};
use crate::lp::{solve_max_min, solve_min_max, DenseMatrix};
use crate::measure::{inf_potential, sup_potential, ProbabilityMeasure};
use crate::space::{DiscreteSpace, SubsetRef};

/// Largest `|H|` for which [`v_value`] enumerates every support without a bound.
pub const V_EXACT_LIMIT: usize = 20;

/// Uniform mass mixed into a max–min strategy so that columns removed for
/// infinity really evaluate to `+∞`.
const KILL_MASS: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameStatus {
    Optimal,
    Infinite,
    RestrictedSupport,
}

/// Optimal value of a game with both players' strategies.
#[derive(Clone, Debug)]
pub struct GameSolution {
    pub value: ExtendedValue,
    pub status: GameStatus,
    /// Upper certificate minus lower certificate; `0` for infinite values.
    pub gap: f64,
    /// Strategy of the minimizing player.
    pub min_strategy: ProbabilityMeasure,
    /// Strategy of the maximizing player.
    pub max_strategy: ProbabilityMeasure,
    /// Pairs `(y, x)` with `k(y, x) = ∞` that force an infinite value.
    pub infinity_witness: Vec<(usize, usize)>,
    /// Support searched for `v`, when applicable.
    pub support: Option<SubsetRef>,
}

impl Serialize for GameSolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GameSolution", 6)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("status", &self.status)?;
        st.serialize_field("gap", &self.gap)?;
        st.serialize_field("min_strategy", self.min_strategy.weights())?;
        st.serialize_field("max_strategy", self.max_strategy.weights())?;
        if !self.infinity_witness.is_empty() {
            st.serialize_field("infinity_witness", &self.infinity_witness)?;
        }
        if let Some(support) = &self.support {
            st.serialize_field("support", support)?;
        }
        st.end()
    }
}

fn check_pair(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> Result<()> {
    h.require_nonempty("H")?;
    l.require_nonempty("L")?;
    h.check_in(space)?;
    l.check_in(space)
}

fn spread(space: &DiscreteSpace, idx: &[usize], w: &[f64]) -> ProbabilityMeasure {
    let mut full = vec![0.0; space.n_points()];
    for (&i, &p) in idx.iter().zip(w) {
        full[i] += p;
    }
    ProbabilityMeasure::from_raw(space, full)
}

fn uniform(space: &DiscreteSpace, idx: &[usize]) -> ProbabilityMeasure {
    let w = vec![1.0; idx.len()];
    spread(space, idx, &w)
}

fn finite_block(space: &DiscreteSpace, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        space.k(rows[r], cols[c]).value().expect("finite block")
    })
}

/// `q(H, L) = inf_{μ ∈ Δ(H)} sup_{x ∈ L} U^μ(x)`.
pub fn q_value(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> Result<GameSolution> {
    check_pair(space, h, l)?;
    let mut finite_rows = Vec::new();
    let mut witness = Vec::new();
    for &y in h.indices() {
        match l.indices().iter().find(|&&x| space.k(y, x).is_infinite()) {
            Some(&x) => witness.push((y, x)),
            None => finite_rows.push(y),
        }
    }
    if finite_rows.is_empty() {
        // every μ on H charges a row with an infinite entry over L; the uniform
        // measure on the witness columns has infinite potential on all of H
        let mut cols: Vec<usize> = witness.iter().map(|&(_, x)| x).collect();
        cols.sort_unstable();
        cols.dedup();
        return Ok(GameSolution {
            value: ExtendedValue::INFINITY,
            status: GameStatus::Infinite,
            gap: 0.0,
            min_strategy: uniform(space, h.indices()),
            max_strategy: uniform(space, &cols),
            infinity_witness: witness,
            support: None,
        });
    }

    let a = finite_block(space, &finite_rows, l.indices());
    let out = solve_min_max(&a);
    let mu = spread(space, &finite_rows, &out.row_strategy);
    let nu = spread(space, l.indices(), &out.col_strategy);
    let (value, _) = sup_potential(space, &mu, l)?;
    let lower = a.min_row_payoff(&out.col_strategy);
    Ok(GameSolution {
        gap: (value.to_f64() - lower).max(0.0),
        value,
        status: GameStatus::Optimal,
        min_strategy: mu,
        max_strategy: nu,
        infinity_witness: Vec::new(),
        support: None,
    })
}

/// `q̲(H, L) = sup_{ν ∈ Δ(H)} inf_{x ∈ L} U^ν(x)`.
pub fn q_lower(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> Result<GameSolution> {
    check_pair(space, h, l)?;
    let mut finite_cols = Vec::new();
    let mut witness = Vec::new();
    for &x in l.indices() {
        match h.indices().iter().find(|&&y| space.k(y, x).is_infinite()) {
            Some(&y) => witness.push((y, x)),
            None => finite_cols.push(x),
        }
    }
    if finite_cols.is_empty() {
        return Ok(GameSolution {
            value: ExtendedValue::INFINITY,
            status: GameStatus::Infinite,
            gap: 0.0,
            min_strategy: uniform(space, l.indices()),
            max_strategy: uniform(space, h.indices()),
            infinity_witness: witness,
            support: None,
        });
    }

    let a = finite_block(space, h.indices(), &finite_cols);
    let out = solve_max_min(&a);
    let mut nu = spread(space, h.indices(), &out.row_strategy);
    let (mut value, _) = inf_potential(space, &nu, l)?;
    if !witness.is_empty() && value.to_f64() < out.lower - DEFAULT_TOL * 1e-3 {
        // a removed column is still finite under ν: charge every row of H
        let mixed: Vec<f64> = out
            .row_strategy
            .iter()
            .map(|p| (1.0 - KILL_MASS) * p + KILL_MASS / h.len() as f64)
            .collect();
        nu = spread(space, h.indices(), &mixed);
        value = inf_potential(space, &nu, l)?.0;
    }
    let mu = spread(space, &finite_cols, &out.col_strategy);
    Ok(GameSolution {
        gap: (out.upper - value.to_f64()).max(0.0),
        value,
        status: GameStatus::Optimal,
        min_strategy: mu,
        max_strategy: nu,
        infinity_witness: witness,
        support: None,
    })
}

/// `u(H) = q(H, X)`.
pub fn u_value(space: &DiscreteSpace, h: &SubsetRef) -> Result<GameSolution> {
    q_value(space, h, &space.all())
}

/// `v(H) = inf_μ sup_{x ∈ supp μ} U^μ(x)`, computed as `min_S q(S, S)` over
/// non-empty supports `S ⊆ H` of size at most `max_support`.
pub fn v_value(
    space: &DiscreteSpace,
    h: &SubsetRef,
    max_support: Option<usize>,
) -> Result<GameSolution> {
    h.require_nonempty("H")?;
    h.check_in(space)?;
    let bound = match max_support {
        Some(0) => return Err(Error::Argument("max_support must be positive".into())),
        Some(b) => b.min(h.len()),
        None if h.len() > V_EXACT_LIMIT => {
            return Err(Error::Argument(format!(
                "|H| = {} exceeds {V_EXACT_LIMIT}; supply a support bound",
                h.len()
            )))
        }
        None => h.len(),
    };

    let idx = h.indices();
    let mut best: Option<(GameSolution, Vec<usize>)> = None;
    let mut chosen = Vec::with_capacity(bound);
    'sizes: for size in 1..=bound {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            chosen.clear();
            chosen.extend(comb.iter().map(|&c| idx[c]));
            let s = SubsetRef::new(chosen.clone(), space.n_points())?;
            let sol = q_value(space, &s, &s)?;
            if best.as_ref().is_none_or(|(b, _)| sol.value < b.value) {
                best = Some((sol, chosen.clone()));
            }
            if best
                .as_ref()
                .is_some_and(|(b, _)| b.value == ExtendedValue::ZERO)
            {
                break 'sizes;
            }
            if !next_combination(&mut comb, idx.len()) {
                break;
            }
        }
    }
    let (mut sol, support) = best.expect("at least one support");
    sol.support = Some(SubsetRef::new(support, space.n_points())?);
    if bound < h.len() {
        sol.status = GameStatus::RestrictedSupport;
    }
    Ok(sol)
}

/// Advances a sorted k-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `|q(H, L) − q̲(L, H)|`; both sides agree by LP duality on finite spaces.
pub fn duality_gap(space: &DiscreteSpace, h: &SubsetRef, l: &SubsetRef) -> Result<f64> {
    let primal = q_value(space, h, l)?;
    let dual = q_lower(space, l, h)?;
    match (primal.value.value(), dual.value.value()) {
        (Some(a), Some(b)) => Ok((a - b).abs()),
        (None, None) => Ok(0.0),
        _ => Err(Error::Data(format!(
            "minimax property violated on H={h}, L={l}: q(H,L) = {}, q̲(L,H) = {}",
            primal.value, dual.value
        ))),
    }
}
