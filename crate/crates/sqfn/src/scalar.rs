//! Floating-point abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable throughout the crate (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count representable")
    }

    #[inline]
    fn to_f64c(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance used for "mathematically equal" comparisons.
    #[inline]
    fn rel_tol() -> Self {
        if std::mem::size_of::<Self>() >= 8 {
            Self::of(1e-9)
        } else {
            Self::of(1e-5)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `a <= b` up to the scalar's relative tolerance.
#[inline]
pub fn le_tol<S: Scalar>(a: S, b: S) -> bool {
    a <= b + S::rel_tol() * b.abs().max(a.abs()).max(S::min_positive_value())
}

/// `a == b` up to the scalar's relative tolerance.
#[inline]
pub fn eq_tol<S: Scalar>(a: S, b: S) -> bool {
    le_tol(a, b) && le_tol(b, a)
}
