//! Potential-theoretic quantities on finite kernel spaces.
//!
//! A [`DiscreteSpace`] carries a symmetric kernel with values in `[0, +∞]`.
//! On top of it the crate computes
//!
//! * energies of pairs of sets: the min–max energy `q(H, L)`, its max–min dual
//!   `q̲(H, L)`, and the uniform, de la Vallée-Poussin and Wiener energies
//!   `u`, `v`, `w` ([`game`], [`energyopt`]);
//! * configurational quantities over `n`-point systems: `n`-th diameters and
//!   Chebyshev constants with their duals ([`confopt`]);
//! * rendezvous and average intervals assembled from both ([`rendezvous`]);
//! * randomized and exhaustive property checks over generated instances ([`verify`]).

// Index loops over dense matrices read better than iterator chains here, and
// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod confopt;
pub mod energyopt;
pub mod error;
pub mod ext;
pub mod game;
pub mod lp;
pub mod measure;
pub mod rendezvous;
pub mod space;
pub mod verify;

pub use confopt::{Method, SearchOptions, TupleWitness};
pub use energyopt::EnergyResult;
pub use error::{Error, Result};
pub use ext::{ext_weighted_sum, intersect_intervals, make_interval, ExtInterval, ExtendedValue};
pub use game::{GameSolution, GameStatus};
pub use measure::ProbabilityMeasure;
pub use rendezvous::RendezvousReport;
pub use space::{CircleMetric, DiscreteSpace, Kernel, SubsetRef};
pub use verify::{InstanceSpec, PropertyReport};

/// Version tag written into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;
