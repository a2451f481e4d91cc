//! Probability measures on a [`DiscreteSpace`], their potentials and energies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{ext_weighted_sum, make_interval, ExtInterval, ExtendedValue};
use crate::space::{DiscreteSpace, SubsetRef};

/// Weights are renormalized when their sum is this close to one, rejected otherwise.
pub const NORMALIZATION_SLACK: f64 = 1e-9;

/// A nonnegative weight vector over the points of a space, summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMeasure {
    space_label: String,
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(space_label: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("measure has no weights".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::Validation(format!(
                "weight {i} = {w} is not a nonnegative real"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ProbabilityMeasure {
            space_label: space_label.into(),
            weights,
        })
    }

    /// Builds a measure from approximate solver output: clamps tiny negatives and renormalizes.
    pub(crate) fn from_raw(space: &DiscreteSpace, mut weights: Vec<f64>) -> Self {
        for w in &mut weights {
            if !(*w > 0.0) {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0);
        for w in &mut weights {
            *w /= total;
        }
        ProbabilityMeasure {
            space_label: space.label().to_string(),
            weights,
        }
    }

    pub fn dirac(space: &DiscreteSpace, i: usize) -> Result<Self> {
        let mut w = vec![0.0; space.n_points()];
        *w.get_mut(i)
            .ok_or_else(|| Error::Argument(format!("index {i} out of range")))? = 1.0;
        Self::new(space.label(), w)
    }

    pub fn uniform_on(space: &DiscreteSpace, subset: &SubsetRef) -> Result<Self> {
        subset.require_nonempty("support")?;
        subset.check_in(space)?;
        let mut w = vec![0.0; space.n_points()];
        let p = 1.0 / subset.len() as f64;
        for &i in subset.indices() {
            w[i] = p;
        }
        Ok(ProbabilityMeasure::from_raw(space, w))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space_label(&self) -> &str {
        &self.space_label
    }

    /// Indices with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub fn is_concentrated_on(&self, subset: &SubsetRef) -> bool {
        self.support().iter().all(|&i| subset.contains(i))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            space_label: String,
            weights: Vec<f64>,
        }
        let f: File = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("malformed measure file: {e}")))?;
        Self::new(f.space_label, f.weights)
    }

    fn check_on(&self, space: &DiscreteSpace) -> Result<()> {
        if self.weights.len() != space.n_points() {
            return Err(Error::Argument(format!(
                "measure has {} weights, space {:?} has {} points",
                self.weights.len(),
                space.label(),
                space.n_points()
            )));
        }
        Ok(())
    }
}

/// `U^μ(x) = Σ_y μ(y) k(x, y)`.
pub fn potential(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    x: usize,
) -> Result<ExtendedValue> {
    mu.check_on(space)?;
    if x >= space.n_points() {
        return Err(Error::Argument(format!("index {x} out of range")));
    }
    ext_weighted_sum(mu.weights(), space.row(x))
}

/// Potentials at every point of the space.
pub fn potentials(space: &DiscreteSpace, mu: &ProbabilityMeasure) -> Result<Vec<ExtendedValue>> {
    (0..space.n_points())
        .map(|x| potential(space, mu, x))
        .collect()
}

/// `Q(μ; L) = max_{x∈L} U^μ(x)` with the attaining index (smallest on ties).
pub fn sup_potential(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    subset: &SubsetRef,
) -> Result<(ExtendedValue, usize)> {
    extreme_potential(space, mu, subset, |cand, best| cand > best)
}

/// `Q̲(μ; L) = min_{x∈L} U^μ(x)` with the attaining index (smallest on ties).
pub fn inf_potential(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    subset: &SubsetRef,
) -> Result<(ExtendedValue, usize)> {
    extreme_potential(space, mu, subset, |cand, best| cand < best)
}

fn extreme_potential(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    subset: &SubsetRef,
    better: impl Fn(ExtendedValue, ExtendedValue) -> bool,
) -> Result<(ExtendedValue, usize)> {
    subset.require_nonempty("L")?;
    subset.check_in(space)?;
    let mut best: Option<(ExtendedValue, usize)> = None;
    for &x in subset.indices() {
        let u = potential(space, mu, x)?;
        if best.is_none_or(|(b, _)| better(u, b)) {
            best = Some((u, x));
        }
    }
    Ok(best.expect("non-empty subset"))
}

/// `W(μ, ν) = Σ_x Σ_y k(x, y) μ(y) ν(x)`.
pub fn mutual_energy(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
) -> Result<ExtendedValue> {
    mu.check_on(space)?;
    nu.check_on(space)?;
    if mu.space_label() != nu.space_label() {
        return Err(Error::Argument(format!(
            "measures live on different spaces ({:?} vs {:?})",
            mu.space_label(),
            nu.space_label()
        )));
    }
    let pots = nu
        .support()
        .into_iter()
        .map(|x| potential(space, mu, x))
        .collect::<Result<Vec<_>>>()?;
    let w: Vec<f64> = nu.support().into_iter().map(|x| nu.weights()[x]).collect();
    ext_weighted_sum(&w, &pots)
}

/// `W(μ) = W(μ, μ)`.
pub fn energy(space: &DiscreteSpace, mu: &ProbabilityMeasure) -> Result<ExtendedValue> {
    mutual_energy(space, mu, mu)
}

/// `A(μ, L) = [Q̲(μ; L), Q(μ; L)]`.
pub fn measure_interval(
    space: &DiscreteSpace,
    mu: &ProbabilityMeasure,
    subset: &SubsetRef,
) -> Result<ExtInterval> {
    let (lo, _) = inf_potential(space, mu, subset)?;
    let (hi, _) = sup_potential(space, mu, subset)?;
    Ok(make_interval(lo, hi))
}
