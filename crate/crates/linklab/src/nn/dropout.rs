//! Inverted dropout: scaling happens at training time so that evaluation is
//! exactly the identity map.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Dropout<T: Scalar> {
    rate: T,
    /// Cached mask already divided by the keep probability.
    cache: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: T) -> Result<Self> {
        if rate < T::zero() || rate >= T::one() {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must lie in [0,1), got {rate}"
            )));
        }
        Ok(Self { rate, cache: None })
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn forward_t<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, rng: &mut R) -> Result<Tensor<T>> {
        let keep = T::one() - self.rate;
        let keep_f = keep.to_f64().unwrap();
        let inv_keep = T::one() / keep;
        let mask: Vec<T> = (0..x.len())
            .map(|_| {
                if rng.gen_range(0.0f64..1.0) < keep_f {
                    inv_keep
                } else {
                    T::zero()
                }
            })
            .collect();
        let mut out = x.clone();
        out.clear_grad();
        for (v, m) in out.values_mut().iter_mut().zip(&mask) {
            *v *= *m;
        }
        self.cache = Some(mask);
        Ok(out)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = x.clone();
        out.clear_grad();
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "dropout" })?;
        let mut dx = dy.clone();
        dx.clear_grad();
        for (g, m) in dx.values_mut().iter_mut().zip(&mask) {
            *g *= *m;
        }
        Ok(dx)
    }
}
