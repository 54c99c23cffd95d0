use std::fmt::Debug;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Number type the closed-form bounds and the LP are evaluated in.
///
/// `BigRational` gives exact results; `f64`/`f32` are for plotting and quick
/// sweeps.
pub trait Scalar: Num + FromPrimitive + PartialOrd + Clone + Debug + Send + Sync {
    fn from_biguint(v: &BigUint) -> Self;

    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    fn to_f64_lossy(&self) -> f64;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl Scalar for f64 {
    fn from_biguint(v: &BigUint) -> Self {
        v.to_f64().unwrap_or(f64::INFINITY)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_biguint(v: &BigUint) -> Self {
        v.to_f32().unwrap_or(f32::INFINITY)
    }

    fn to_f64_lossy(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn from_biguint(v: &BigUint) -> Self {
        BigRational::from_integer(BigInt::from(v.clone()))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

pub(crate) fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}
