//! Scalar abstraction shared by the physics layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point type usable by the channel, energy and geometry models.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal or parameter.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Decibel to linear power ratio.
#[inline]
pub fn db_to_linear<F: Scalar>(db: F) -> F {
    F::lit(10.0).powf(db / F::lit(10.0))
}

/// Linear power ratio to decibel.
#[inline]
pub fn linear_to_db<F: Scalar>(lin: F) -> F {
    F::lit(10.0) * lin.log10()
}

/// dBm to Watt.
#[inline]
pub fn dbm_to_watt<F: Scalar>(dbm: F) -> F {
    db_to_linear(dbm - F::lit(30.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        for db in [-70.0f64, 0.0, 3.0, 92.05] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-9);
        }
        assert!((dbm_to_watt(-70.0f64) - 1e-10).abs() < 1e-22);
        assert!((dbm_to_watt(30.0f32) - 1.0).abs() < 1e-6);
    }
}
