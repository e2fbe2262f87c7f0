//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f32` and `f64`. Amplitudes are `Complex<R>`.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::lapack::LapackSvd;

/// Real floating-point type usable as the base field of the simulation.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + LapackSvd
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossless-enough conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite real")
    }

    /// Machine epsilon of the type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over the real field `R`.
pub type Cx<R> = Complex<R>;

#[inline]
pub(crate) fn cx<R: Real>(re: f64, im: f64) -> Cx<R> {
    Complex::new(R::lit(re), R::lit(im))
}

#[inline]
pub(crate) fn re<R: Real>(x: R) -> Cx<R> {
    Complex::new(x, R::zero())
}

/// `|z|`.
#[inline]
pub(crate) fn cabs<R: Real>(z: Cx<R>) -> R {
    z.re.hypot(z.im)
}

/// `exp(z)`.
#[inline]
pub(crate) fn cexp<R: Real>(z: Cx<R>) -> Cx<R> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// `x log2 x` with `0 log 0 = 0`; negative inputs are treated as zero.
#[inline]
pub fn xlog2x<R: Real>(x: R) -> R {
    if x <= R::zero() {
        R::zero()
    } else {
        x * x.ln() / R::ln_2()
    }
}
