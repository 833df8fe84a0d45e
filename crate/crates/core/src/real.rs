use nalgebra as na;
use num_traits as nt;

/// Floating point scalar the numerical code is written against.
pub trait Real:
    Copy + Send + Sync + nt::FloatConst + nt::FromPrimitive + na::RealField + na::Scalar
{
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    na::convert(x)
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_subset().unwrap_or(f64::NAN)
}
