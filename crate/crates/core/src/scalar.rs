//! Floating-point scalar abstraction for the analytic model.
//!
//! All closed-form computations are generic over [`Real`] so they run in
//! either precision; `f64` is the default everywhere and the only precision
//! the documented tolerances are stated for.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real: Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display {
    /// Lossless embedding of small integer counts (node counts, buffer
    /// sizes, iteration indices) into the scalar type.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Shorthand for converting literal constants.
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
