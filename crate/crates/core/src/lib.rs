//! Exact-enumeration laboratory for mixed p-spin spin glasses on the
//! hypercube.
//!
//! * [`mixture`] and [`thresholds`]: the covariance function `xi`, dynamical
//!   and critical temperatures, large-p constants and OGP bands.
//! * [`disorder`] and [`landscape`]: Gaussian couplings, planted and
//!   interpolated instances, full energy tables and Gibbs measures.
//! * [`shattering`] and [`ogp`]: cluster decompositions, slice bounds,
//!   soft-OGP events and exceptional sets.
//! * [`algolab`]: search algorithms, their correlation curves and rarity
//!   reports.

// Negated float comparisons such as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algolab;
pub mod disorder;
pub mod error;
pub mod landscape;
pub mod mixture;
pub mod numerics;
pub mod ogp;
pub mod rng;
pub mod shattering;
pub mod spins;
pub mod stats;
pub mod thresholds;

pub use error::{Error, Result};
pub use mixture::MixtureSpec;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/landscape.md")]
    mod landscape {}
    #[doc = include_str!("../../../book/src/shattering.md")]
    mod shattering {}
    #[doc = include_str!("../../../book/src/ogp.md")]
    mod ogp {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/performance.md")]
    mod performance {}
}
