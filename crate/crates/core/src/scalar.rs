//! Scalar abstraction for the numeric core.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the distortion calculus and the certificate
/// machinery are generic over. Implemented by `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
    /// Lossless conversion from `usize` counters (pull counts, rounds).
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    /// Conversion from `f64` configuration values (confidence levels,
    /// tolerances).
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("config value representable as scalar")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Default
        + Send
        + Sync
        + 'static
{
}
