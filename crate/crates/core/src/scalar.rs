//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All hydraulic and estimation code is written against [`Real`], which is
//! satisfied by `f32` and `f64`. Exact/rational arithmetic is not offered:
//! the estimator needs a singular value decomposition, which only exists
//! for real fields.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::linalg::{faer_svd, Svd};

pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug {
    /// Floor applied to absolute tolerances so that `f32` callers are not
    /// held to `f64` precision.
    fn precision_floor() -> Self;

    /// `None` if the decomposition fails to converge.
    fn svd(m: &DMatrix<Self>) -> Option<Svd<Self>>;
}

impl Real for f64 {
    fn precision_floor() -> Self {
        f64::EPSILON * 1.0e3
    }

    fn svd(m: &DMatrix<Self>) -> Option<Svd<Self>> {
        faer_svd(m)
    }
}

impl Real for f32 {
    fn precision_floor() -> Self {
        f32::EPSILON * 1.0e3
    }

    fn svd(m: &DMatrix<Self>) -> Option<Svd<Self>> {
        faer_svd(m)
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a scalar into `f64` for reporting and statistics.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

/// A tolerance stated for double precision, widened to the precision floor
/// of `T`.
#[inline]
pub fn tolerance<T: Real>(tol_f64: f64) -> T {
    let tol = lit::<T>(tol_f64);
    if tol > T::precision_floor() {
        tol
    } else {
        T::precision_floor()
    }
}
