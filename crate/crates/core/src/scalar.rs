//! Scalar abstraction shared by ratings, similarities and metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real number type a [`RatingsMatrix`](crate::RatingsMatrix) is stored in.
///
/// Implemented for `f32` and `f64`. Everything downstream of the matrix
/// (similarities, predictions, metrics) is computed in the same type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable as float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
