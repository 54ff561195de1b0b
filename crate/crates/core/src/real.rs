//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is generic over [`Real`], a small bundle of
//! `num-traits` bounds satisfied by `f32` and `f64`. Concrete aliases for the
//! common `f64` instantiation live at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar usable by the solvers: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FloatConst
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + Debug
        + Display
        + LowerExp
        + Default
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for pulling `f64` literals into a generic scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// `x / y` as `usize`-free generic helper for grid spacings.
#[inline]
pub fn two<T: Real>() -> T {
    T::one() + T::one()
}

/// Largest magnitude of a slice, zero for an empty slice.
pub fn max_abs<T: Real>(values: &[T]) -> T {
    values
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v.abs()))
}
