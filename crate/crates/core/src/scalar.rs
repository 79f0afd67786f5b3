//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the numerical core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest magnitude treated as a non-zero perturbation.
    ///
    /// `1e-300` for `f64`; for narrower types the smallest positive normal.
    #[inline]
    fn tiny() -> Self {
        Self::of(1e-300).max(Self::min_positive_value())
    }

    /// Largest 1-norm condition number accepted by dense solves.
    #[inline]
    fn max_condition() -> Self {
        Self::of(1e15).min(Self::of(0.1) / Self::epsilon())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
