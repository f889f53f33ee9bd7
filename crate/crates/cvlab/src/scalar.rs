//! Scalar abstractions: floating-point fields and coefficient rings.
//!
//! The numerical engines are generic over [`Real`] (an IEEE-style float:
//! `f32` or `f64`), and the symbolic ladder algebra is generic over
//! [`Coeff`] (a commutative `*`-ring), which admits both floating complex
//! scalars and exact Gaussian rationals ([`Exact`]).

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, One, Zero};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar type backing the floating-point engines.
///
/// A thin extension of `num_traits::Float` with explicit lossy
/// conversions to and from `f64`, used when tolerances and tabulated
/// constants must cross the generic boundary.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant into this type (rounding if needed).
    fn of(x: f64) -> Self;
    /// Convert into `f64`, rounding if needed.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// Coefficient ring for ladder polynomials.
///
/// Implementors form a commutative ring with conjugation. The ring is
/// either approximate (complex floats, where [`Coeff::approx_mag`]
/// reports a magnitude used for chopping round-off dust) or exact
/// (rational complex numbers, where only literal zeros are dropped).
pub trait Coeff:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Embed a (small) integer into the ring.
    fn from_integer(n: i64) -> Self;
    /// The imaginary unit `i`.
    fn imag() -> Self;
    /// Complex conjugate.
    fn conjugate(&self) -> Self;
    /// `Some(|z|)` for approximate rings (enables `chop`), `None` for
    /// exact rings (nothing is ever chopped).
    fn approx_mag(&self) -> Option<f64>;
}

impl<T: Real> Coeff for Complex<T> {
    #[inline]
    fn from_integer(n: i64) -> Self {
        Complex::new(T::of(n as f64), T::zero())
    }
    #[inline]
    fn imag() -> Self {
        Complex::new(T::zero(), T::one())
    }
    #[inline]
    fn conjugate(&self) -> Self {
        self.conj()
    }
    #[inline]
    fn approx_mag(&self) -> Option<f64> {
        Some(self.re.to_f64_lossy().hypot(self.im.to_f64_lossy()))
    }
}

/// Exact coefficient ring: complex numbers with arbitrary-precision
/// rational real and imaginary parts (the ring `Q[i]` completed over
/// rationals). Ladder-algebra identities hold on the nose here.
pub type Exact = Complex<BigRational>;

impl Coeff for Exact {
    fn from_integer(n: i64) -> Self {
        Complex::new(
            BigRational::from_integer(n.into()),
            BigRational::from_integer(0.into()),
        )
    }
    fn imag() -> Self {
        Complex::new(
            BigRational::from_integer(0.into()),
            BigRational::from_integer(1.into()),
        )
    }
    fn conjugate(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn approx_mag(&self) -> Option<f64> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_roundtrip() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(1.5f64.to_f64_lossy(), 1.5);
        assert_eq!(f32::of(0.25), 0.25f32);
    }

    #[test]
    fn exact_ring_ops() {
        let two = Exact::from_integer(2);
        let three = Exact::from_integer(3);
        assert_eq!(two.clone() * three.clone(), Exact::from_integer(6));
        assert_eq!(two.conjugate(), two);
        assert!(Exact::from_integer(0).is_zero());
        assert!(Exact::from_integer(5).approx_mag().is_none());
    }

    #[test]
    fn imaginary_unit_squares_to_minus_one() {
        let i = Exact::imag();
        assert_eq!(i.clone() * i, Exact::from_integer(-1));
        let j = <Complex<f64> as Coeff>::imag();
        assert_eq!(j * j, Complex::new(-1.0, 0.0));
    }
}
