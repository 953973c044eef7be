//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (matrices, spectra, samplers, risk formulas) is
//! generic over a floating point type implementing [`Real`]. `f64` is the
//! default used by the CLI and presets; `f32` is available for quick,
//! low-precision experiments. Concrete aliases live at the crate root.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable throughout the library.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + fmt::Display
    + fmt::Debug
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64` literals and RNG output.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 must convert to scalar type")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert to scalar type")
    }

    /// Widening conversion used for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
