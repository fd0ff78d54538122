//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for times (ms), potentials and weights.
///
/// Implemented for `f32` and `f64`. Everything in the crate is generic over
/// this trait; the crate root re-exports `f64` and `f32` aliases of the main
/// types.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the grid point nearest to `time` for a grid with step `dt`.
pub(crate) fn grid_index<T: Scalar>(time: T, dt: T) -> i64 {
    (time / dt).round().to_i64().unwrap_or(i64::MAX)
}
