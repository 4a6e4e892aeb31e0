use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the model math is generic over.
///
/// Training runs in `f32`; gradient checking runs in `f64` where central
/// differences with `h = 1e-4` are meaningful.
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
    /// Converts an `f64` literal or computed value into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }

    fn as_f32(self) -> f32 {
        self.to_f32().expect("float scalar converts to f32")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
