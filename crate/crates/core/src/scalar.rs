//! Floating-point scalar abstraction used by the analytical bounds and the
//! scaling fit.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn from_u64_lossy(x: u64) -> Self {
        Self::from_u64(x).unwrap_or_else(Self::infinity)
    }
}

impl Real for f32 {}
impl Real for f64 {}
