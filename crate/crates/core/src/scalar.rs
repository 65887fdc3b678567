use std::fmt::{Debug, Display};

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the linear algebra is generic over: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from a double literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in float")
    }

    /// Relative precision the numeric checks should expect for this type.
    fn tolerance_scale() -> Self;
}

impl Real for f32 {
    fn tolerance_scale() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn tolerance_scale() -> Self {
        f64::EPSILON
    }
}

pub type Cx<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

pub(crate) fn cx<T: Real>(re: T) -> Cx<T> {
    Complex::new(re, T::zero())
}

/// Lift a real matrix to complex.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMat<T> {
    m.map(cx)
}
