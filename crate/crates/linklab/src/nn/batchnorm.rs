//! Batch normalization over the feature axis of a `[batch, features]` tensor.
//!
//! Training mode normalizes with biased batch statistics and tracks running
//! estimates (momentum 0.1, unbiased variance, PyTorch convention);
//! evaluation mode normalizes with the running estimates. The affine scale
//! and shift are trainable parameters; the running stats are state.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::tensor::Tensor;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct BnCache<T: Scalar> {
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    batch: usize,
}

#[derive(Debug, Clone)]
pub struct BatchNorm1d<T: Scalar> {
    features: usize,
    /// Scale γ, initialized to 1.
    pub(crate) gamma: Tensor<T>,
    /// Shift β, initialized to 0.
    pub(crate) beta: Tensor<T>,
    pub(crate) running_mean: Tensor<T>,
    pub(crate) running_var: Tensor<T>,
    momentum: T,
    eps: T,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(features: usize) -> Self {
        Self {
            features,
            gamma: Tensor::filled(vec![features], T::one()),
            beta: Tensor::zeros(vec![features]),
            running_mean: Tensor::zeros(vec![features]),
            running_var: Tensor::filled(vec![features], T::one()),
            momentum: real(BN_MOMENTUM),
            eps: real(BN_EPS),
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.features] {
            return Err(Error::ShapeMismatch {
                op: "batchnorm1d.output_shape",
                expected: vec![self.features],
                got: input.to_vec(),
            });
        }
        Ok(vec![self.features])
    }

    fn check_input(&self, x: &Tensor<T>, op: &'static str) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.features {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![0, self.features],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, "batchnorm1d.forward")?;
        let batch = x.batch();
        if batch < 2 {
            return Err(Error::InvalidConfig(
                "batchnorm1d training forward needs batch >= 2".into(),
            ));
        }
        let n = real::<T>(batch as f64);
        let f = self.features;

        let mut mean = vec![T::zero(); f];
        let mut var = vec![T::zero(); f];
        for bi in 0..batch {
            for (j, v) in x.row(bi).iter().enumerate() {
                mean[j] += *v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for bi in 0..batch {
            for (j, v) in x.row(bi).iter().enumerate() {
                let d = *v - mean[j];
                var[j] += d * d;
            }
        }
        for v in &mut var {
            *v /= n; // biased, used for normalization
        }

        let inv_std: Vec<T> = var.iter().map(|v| T::one() / (*v + self.eps).sqrt()).collect();
        let mut x_hat = vec![T::zero(); batch * f];
        let mut out = vec![T::zero(); batch * f];
        let g = self.gamma.values();
        let b = self.beta.values();
        for bi in 0..batch {
            let xr = x.row(bi);
            for j in 0..f {
                let xh = (xr[j] - mean[j]) * inv_std[j];
                x_hat[bi * f + j] = xh;
                out[bi * f + j] = g[j] * xh + b[j];
            }
        }

        // Running stats keep the unbiased variance estimate.
        let unbias = n / (n - T::one());
        let m = self.momentum;
        let one_m = T::one() - m;
        for j in 0..f {
            let rm = self.running_mean.values_mut();
            rm[j] = one_m * rm[j] + m * mean[j];
            let rv = self.running_var.values_mut();
            rv[j] = one_m * rv[j] + m * var[j] * unbias;
        }

        self.cache = Some(BnCache {
            x_hat,
            inv_std,
            batch,
        });
        Tensor::new(vec![batch, f], out)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, "batchnorm1d.infer")?;
        let batch = x.batch();
        let f = self.features;
        let g = self.gamma.values();
        let b = self.beta.values();
        let rm = self.running_mean.values();
        let rv = self.running_var.values();
        let mut out = vec![T::zero(); batch * f];
        for bi in 0..batch {
            let xr = x.row(bi);
            for j in 0..f {
                let xh = (xr[j] - rm[j]) / (rv[j] + self.eps).sqrt();
                out[bi * f + j] = g[j] * xh + b[j];
            }
        }
        Tensor::new(vec![batch, f], out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "batchnorm1d" })?;
        let batch = cache.batch;
        let f = self.features;
        if dy.shape() != [batch, f] {
            return Err(Error::ShapeMismatch {
                op: "batchnorm1d.backward",
                expected: vec![batch, f],
                got: dy.shape().to_vec(),
            });
        }
        let n = real::<T>(batch as f64);

        let mut dgamma = vec![T::zero(); f];
        let mut dbeta = vec![T::zero(); f];
        for bi in 0..batch {
            let gr = dy.row(bi);
            for j in 0..f {
                dgamma[j] += gr[j] * cache.x_hat[bi * f + j];
                dbeta[j] += gr[j];
            }
        }

        // dx = γ/σ · (dy − mean(dy) − x̂ · mean(dy·x̂)), means taken over the batch.
        let g = self.gamma.values();
        let mut dx = vec![T::zero(); batch * f];
        for bi in 0..batch {
            let gr = dy.row(bi);
            for j in 0..f {
                let xh = cache.x_hat[bi * f + j];
                let term = gr[j] - dbeta[j] / n - xh * dgamma[j] / n;
                dx[bi * f + j] = g[j] * cache.inv_std[j] * term;
            }
        }

        self.gamma.accumulate_grad(&dgamma);
        self.beta.accumulate_grad(&dbeta);
        Tensor::new(vec![batch, f], dx)
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    /// Inference cost: the normalization folds into one scale and one shift.
    pub fn flops(&self) -> u64 {
        (2 * self.features) as u64
    }

    /// Running variance must stay positive for inference to be defined.
    pub fn validate_state(&self) -> Result<()> {
        if self.running_var.values().iter().any(|v| *v <= T::zero()) {
            return Err(Error::InvalidConfig(
                "batchnorm1d running variance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn training_forward_standardizes_the_batch() {
        // With γ=1, β=0 the output is the pre-affine normalization; its batch
        // mean must vanish and its biased variance must be 1.
        let mut bn = BatchNorm1d::<f64>::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::randn(vec![64, 3], &mut rng);
        let y = bn.forward_t(&x).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..64).map(|bi| y.row(bi)[j]).collect();
            let mean = col.iter().sum::<f64>() / 64.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-6, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "var {var}");
        }
    }

    #[test]
    fn eval_uses_running_stats_and_needs_no_batch() {
        let mut bn = BatchNorm1d::<f64>::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = Tensor::randn(vec![32, 2], &mut rng);
            bn.forward_t(&x).unwrap();
        }
        bn.validate_state().unwrap();
        // Running stats converge to the sampling distribution N(0,1).
        for j in 0..2 {
            assert_relative_eq!(bn.running_mean.values()[j], 0.0, epsilon = 0.1);
            assert_relative_eq!(bn.running_var.values()[j], 1.0, epsilon = 0.15);
        }
        let x = Tensor::new(vec![1, 2], vec![0.5, -0.5]).unwrap();
        let y = bn.infer(&x).unwrap();
        assert!(y.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn training_batch_of_one_is_rejected() {
        let mut bn = BatchNorm1d::<f64>::new(2);
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        assert!(bn.forward_t(&x).is_err());
    }
}
