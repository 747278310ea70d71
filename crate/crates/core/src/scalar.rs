//! Scalar abstraction shared by the motion math.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the kinematics, metric and signature code.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Threshold below which a norm is considered degenerate.
    fn norm_eps() -> Self;
}

impl Real for f32 {
    fn norm_eps() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn norm_eps() -> Self {
        1e-12
    }
}
