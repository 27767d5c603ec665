//! Entropy / Dirichlet-form machinery for finite reversible Markov chains,
//! flow-based comparison of generators, and an exhaustive instantiation for
//! the switch chain on bipartite d-regular graphs.
//!
//! Arithmetic is split into two lanes:
//! * an exact lane ([`Rat`] = arbitrary-precision rationals) for stationary
//!   measures, rates, flow weights, detailed balance and conservation checks;
//! * an analytic lane generic over [`Scalar`] (any IEEE float) for entropy,
//!   Dirichlet forms and everything involving logarithms, with [`Real`] =
//!   `f64` as the concrete default used by the CLI and the test suite.

pub mod aux_chain;
pub mod chain;
pub mod constants;
pub mod flows;
pub mod graph_space;
pub mod oracles;
pub mod regularize;
pub mod report;
pub mod scalar;
pub mod switch_chain;

pub use chain::{ChainError, FiniteChain, StateFunction};
pub use scalar::Scalar;

/// Exact rational used throughout the exact lane.
pub type Rat = num_rational::BigRational;

/// Concrete analytic scalar used by the CLI and acceptance suite.
pub type Real = f64;

/// Convenience: exact rational from an integer pair.
pub fn rat(n: i64, d: i64) -> Rat {
    use num_bigint::BigInt;
    Rat::new(BigInt::from(n), BigInt::from(d))
}
