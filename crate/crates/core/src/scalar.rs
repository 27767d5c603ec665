//! Floating-point scalar abstraction for the analytic lane.

use crate::Rat;
use num_traits::{Float, FromPrimitive, Signed, ToPrimitive};

/// Floating-point scalar for entropy / Dirichlet computations.
///
/// Implemented for `f32` and `f64`; everything log-flavoured in the crate is
/// generic over this trait, with exact rationals converted in at the boundary.
pub trait Scalar:
    Float
    + FromPrimitive
    + Signed
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_rat(r: &Rat) -> Self {
        Self::from_f64(rat_to_f64(r)).expect("f64 converts into every Scalar")
    }

    fn from_usize_(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits in every Scalar at tested sizes")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Nearest-f64 value of an exact rational.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
