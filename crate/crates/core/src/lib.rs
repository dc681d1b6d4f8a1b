//! Strong (pathwise) discrete approximation of the Black–Scholes–Merton
//! model driven by nested "twist and shrink" random walks.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: walk construction, the level-`m` binomial market, lattice
//! pricing and hedging, payoff mollification, discrete Feynman–Kac solvers
//! and rate fitting. IO and orchestration live in the `strongwalk` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod claim;
pub mod coins;
pub mod error;
pub mod feynman_kac;
pub mod hedging;
pub mod lattice;
pub mod market;
pub mod math;
pub mod mollifier;
pub mod quad;
pub mod rate;
pub mod walk;

pub use claim::{Claim, Payoff};
pub use coins::CoinMatrix;
pub use error::{Error, Result};
pub use market::{MarketLevel, MarketParams};
pub use rate::{fit_rate, RateFit};
pub use walk::{NestedWalk, WalkLevel, WalkPath};
