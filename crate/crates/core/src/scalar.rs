//! Scalar abstraction over the floating-point element type.
//!
//! Everything numeric in this crate is generic over [`Scalar`], so the whole
//! pipeline runs in `f32` or `f64` (the crate root exports concrete aliases
//! for both). `f64` is the default and is what the CLI uses.

use std::fmt::{Debug, Display};
use std::str::FromStr;

/// Floating-point scalar used for features, weights, scores and metrics.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + FromStr
    + Debug
    + Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion for reporting and serialization.
    fn to_f64_lossy(self) -> f64;

    fn from_f64_lossy(value: f64) -> Self;

    /// Converts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    fn from_f64_lossy(value: f64) -> Self {
        value as f32
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn from_f64_lossy(value: f64) -> Self {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean<T: Scalar>(xs: &[T]) -> T {
        xs.iter().copied().sum::<T>() / T::from_count(xs.len())
    }

    #[test]
    fn generic_mean_works_for_both_widths() {
        assert_eq!(mean(&[1.0f64, 2.0, 3.0]), 2.0);
        assert_eq!(mean(&[1.0f32, 2.0, 3.0]), 2.0);
    }
}
