//! Scalar abstraction shared by every numerical routine in the crate.

use num_complex::Complex;
use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use std::fmt::{Debug, Display, LowerExp};

/// Real floating point type the solver can be instantiated with (`f32` or `f64`).
pub trait Real:
    FftNum + Float + FloatConst + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, rounding if the target is narrower.
    fn lit(value: f64) -> Self;

    /// Lossy conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(value: f64) -> Self {
        value
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `exp(i * phase)`.
#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(c, s)
}

/// Max-norm of a complex slice.
pub fn max_abs<T: Real>(values: &[Complex<T>]) -> T {
    values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
}

/// Euclidean norm of a complex slice, scaled to avoid overflow.
pub fn l2_norm<T: Real>(values: &[Complex<T>]) -> T {
    let scale = max_abs(values);
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let inv = T::one() / scale;
    let sum = values
        .iter()
        .fold(T::zero(), |acc, v| acc + (*v * inv).norm_sqr());
    scale * sum.sqrt()
}

/// Cascaded sum with Knuth's error-free TwoSum per component: the result
/// is as accurate as if accumulated in twice the working precision, so
/// heavy cancellation among the terms does not destroy relative accuracy.
pub fn accurate_sum<T: Real>(values: &[Complex<T>]) -> Complex<T> {
    fn cascade<T: Real>(xs: impl Iterator<Item = T>) -> T {
        let (mut s, mut err) = (T::zero(), T::zero());
        for x in xs {
            let t = s + x;
            let bp = t - s;
            err = err + ((s - (t - bp)) + (x - bp));
            s = t;
        }
        s + err
    }
    Complex::new(
        cascade(values.iter().map(|v| v.re)),
        cascade(values.iter().map(|v| v.im)),
    )
}
