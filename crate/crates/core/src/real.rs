//! Scalar abstraction shared by every numeric routine in the crate.

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Floating point type the statistics, calibration and detector are generic over.
///
/// Implemented for `f32` and `f64`. Closed-form constants and integer
/// conversions go through [`Real::of`] and [`Real::of_usize`], which cannot
/// fail for the two supported types.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + sealed::Sealed
    + 'static
{
    /// Machine epsilon as used by relative comparisons.
    const EPS: Self;

    fn of(x: f64) -> Self;

    fn of_usize(n: usize) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPS: Self = <$t>::EPSILON;

            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn of_usize(n: usize) -> Self {
                n as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
