//! Floating-point scalar abstraction: f32 or f64.

use num_traits::{Float, FromPrimitive};

/// Scalar type the numerical kernels are generic over.
pub trait Real:
    Float
    + FromPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + core::fmt::Debug
        + core::fmt::Display
        + core::iter::Sum
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an f64 literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal out of range for scalar type")
}

/// x^e for x >= 0. Half-integer exponents go through sqrt-and-multiply,
/// which is much cheaper than powf in the per-node hot loops.
#[inline]
pub fn pow_pos<T: Real>(x: T, e: T) -> T {
    if x <= T::zero() {
        if x == T::zero() && e > T::zero() {
            return T::zero();
        }
        return T::nan();
    }
    let two = lit::<T>(2.0);
    let doubled = e * two;
    let k = doubled.round();
    if (doubled - k).abs() < lit(1e-12) {
        if let Some(ki) = k.to_i32() {
            if (0..=8).contains(&ki) {
                let r = x.sqrt();
                return r.powi(ki);
            }
        }
    }
    x.powf(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_pos_matches_powf() {
        let xs = [1e-9_f64, 0.3, 1.0, 7.5];
        let es = [0.5_f64, 1.0, 1.5, 2.0, 2.5, 3.7];
        for &x in &xs {
            for &e in &es {
                let got = pow_pos(x, e);
                let want = x.powf(e);
                assert!((got - want).abs() <= 1e-14 * want.abs().max(1e-300));
            }
        }
        assert_eq!(pow_pos(0.0_f64, 1.5), 0.0);
    }

    #[test]
    fn lit_works_for_f32() {
        let v: f32 = lit(0.25);
        assert_eq!(v, 0.25_f32);
    }
}
