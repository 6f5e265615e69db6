//! Scalar abstraction for the numeric code.
//!
//! Everything that only does arithmetic is generic over [`Float`]; sampling
//! code additionally requires the rand distributions for the scalar, which is
//! expressed as extra bounds at the sampling sites rather than here.

use std::fmt;
use std::iter::Sum;

use num_traits::{FromPrimitive, ToPrimitive};

/// The scalar types the library computes with (`f32`, `f64`).
pub trait Float:
    num_traits::Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and tolerances.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("f64 conversion")
    }

    /// `n` as a scalar, for averaging.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("usize conversion")
    }
}

impl Float for f32 {}
impl Float for f64 {}
