//! Numerical engine for Gaussian global coordination games.
//!
//! Agents observe a common Gaussian state through independent Gaussian
//! channels and choose between a safe and a risky action. The crate
//! computes equilibrium, certainty-equivalent and oracle threshold policies,
//! the probability that an agent's action matches the perfect-information
//! action, and an information-theoretic ceiling on that probability.
//!
//! The `book/` directory at the repository root walks through the concepts;
//! its code listings are compiled and run as doctests of this crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants keep every digit the oracle printed.
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};
pub use game::{AgentCount, GameParams, PolicyProfile};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    mod equilibria {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/fano.md")]
    mod fano {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
