//! Scalar abstraction for the linear layer.
//!
//! The simplex, polyhedra and Farkas encoder are written once against
//! [`Scalar`]; the prover itself instantiates them with exact rationals.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive};

/// Ordered field element usable by the exact linear layer.
///
/// Implementations for `f64` are provided for experimentation; sign tests on
/// floats are exact comparisons against zero and therefore not robust.
pub trait Scalar:
    Clone + PartialOrd + Debug + Display + num_traits::Num + Signed + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;
    /// Nearest representable value of an exact rational.
    fn from_rational(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;

    /// `self -= f * x`.
    fn sub_mul_assign(&mut self, f: &Self, x: &Self) {
        *self = self.clone() - f.clone() * x.clone();
    }

    fn div_assign_ref(&mut self, d: &Self) {
        *self = self.clone() / d.clone();
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        rat_to_f64(self)
    }
    fn sub_mul_assign(&mut self, f: &Self, x: &Self) {
        *self -= f * x;
    }
    fn div_assign_ref(&mut self, d: &Self) {
        *self /= d;
    }
}

impl Scalar for Ratio<i128> {
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn from_rational(r: &BigRational) -> Self {
        let n = r.numer().to_i128().expect("numerator exceeds i128");
        let d = r.denom().to_i128().expect("denominator exceeds i128");
        Ratio::new(n, d)
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

macro_rules! impl_float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn from_i64(v: i64) -> Self {
                v as $t
            }
            fn from_rational(r: &BigRational) -> Self {
                rat_to_f64(r) as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}

impl_float_scalar!(f32, f64);

/// Converts a big rational to the nearest-ish f64, robust to huge parts.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both parts so they fit into a double.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 900).max(0) as usize;
    let shift_d = (db - 900).max(0) as usize;
    let n = (r.numer() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}
