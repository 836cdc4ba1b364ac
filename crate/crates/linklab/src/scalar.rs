//! Floating-point abstraction for the numeric core.
//!
//! Every tensor, layer, channel and training routine in this crate is generic
//! over [`Scalar`] so the same code instantiates at `f32` or `f64`. The
//! shipped tools pin `f64` through the aliases at the crate root; the tiny
//! networks involved make double precision essentially free and keep
//! gradient-check tolerances tight.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar usable as the element type of the numeric core.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// One draw from the standard normal distribution N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f32, _>(StandardNormal)
    }
}

impl Scalar for f64 {
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f64, _>(StandardNormal)
    }
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_draws_are_seed_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..32 {
            let x: f64 = Scalar::standard_normal(&mut a);
            let y: f64 = Scalar::standard_normal(&mut b);
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn real_converts_constants() {
        let x: f32 = real(0.25);
        assert_eq!(x, 0.25f32);
        let y: f64 = real(2.83);
        assert_eq!(y, 2.83f64);
    }
}
