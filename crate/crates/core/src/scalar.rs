//! Scalar abstractions.
//!
//! The counting estimators (Nelson-Aalen, Kaplan-Meier, step functions) only
//! need field arithmetic and an ordering, so they run unchanged over exact
//! rationals. Everything that touches `exp`/`ln` needs [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field: enough for counting-process estimators.
pub trait Field: Num + Copy + PartialOrd + Debug + Send + Sync {}

impl<T> Field for T where T: Num + Copy + PartialOrd + Debug + Send + Sync {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
