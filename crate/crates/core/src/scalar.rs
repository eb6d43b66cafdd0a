//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the models and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Gradient checks and the acceptance suite
/// run in `f64`; `f32` halves the memory of embedding tables and models.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shortest decimal representation that parses back to the same value.
pub(crate) fn fmt_exact<T: Scalar>(x: T) -> String {
    format!("{:?}", x.as_f64())
}

/// Parses a value written by [`fmt_exact`]. `f32 -> f64 -> f32` is exact, so
/// checkpoints written in either precision round-trip bit-for-bit.
pub(crate) fn parse_exact<T: Scalar>(s: &str) -> Option<T> {
    let v: f64 = s.trim().parse().ok()?;
    T::from_f64(v)
}
