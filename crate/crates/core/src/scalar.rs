use std::fmt::Debug;

use num_traits::Float;

/// Scalar type accepted by the generic kernels.
pub trait Real: Float + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn from_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl<T: Float + Debug + Send + Sync + 'static> Real for T {}
