//! Verification toolkit for expected sums of order statistics over
//! pairwise-independent map families.
//!
//! * [`field`] and [`family`] build GF(p^k) and the affine family
//!   `i -> l*i + m` together with the symmetric group and product families,
//!   and check their marginal and pair conditions.
//! * [`order_stats`] computes decreasing rearrangements and certifies the
//!   two-sided bound of `E sum_{k<=l} kmax_i |a(i, g(i))|` against
//!   `int_0^l a*`, plus the reduction to averaged functions.
//! * [`orlicz`] and [`rv`] handle Orlicz functions, Luxemburg norms and the
//!   Orlicz-norm description of order statistics of iid sequences.
//! * [`embedding`] builds the map `l_M^n -> l_1^{N n^2}` and measures its
//!   distortion.

pub mod embedding;
pub mod error;
pub mod exact;
pub mod family;
pub mod field;
pub mod io;
pub mod order_stats;
pub mod orlicz;
pub mod rng;
pub mod rv;

pub use error::{Error, Result};
pub use family::{ConditionReport, MapFamily, WeightedSpace};
pub use field::FiniteField;
pub use order_stats::{BivariateFunction, BoundReport, ExpectationMode, StepFunction};
pub use orlicz::{OrliczFunction, QuantileFunction};
pub use rng::Estimate;
pub use rv::Distribution;
