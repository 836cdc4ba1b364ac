//! Fully connected layer: `y = x Wᵀ + b`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    in_dim: usize,
    out_dim: usize,
    /// Weight matrix, row-major `[out, in]`.
    pub(crate) weight: Tensor<T>,
    /// Bias vector `[out]`.
    pub(crate) bias: Tensor<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    /// Uniform init on `±1/√in_dim` for both weight and bias.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = real::<T>(1.0) / real::<T>(in_dim as f64).sqrt();
        let mut init = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    let u: T = real(rng.gen_range(-1.0f64..1.0));
                    u * bound
                })
                .collect()
        };
        let weight = Tensor::new(vec![out_dim, in_dim], init(out_dim * in_dim)).unwrap();
        let bias = Tensor::new(vec![out_dim], init(out_dim)).unwrap();
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
            cache: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape().len() != 1 || weight.shape()[0] != bias.shape()[0]
        {
            return Err(Error::ShapeMismatch {
                op: "linear.from_parts",
                expected: vec![bias.shape()[0]],
                got: weight.shape().to_vec(),
            });
        }
        Ok(Self {
            in_dim: weight.shape()[1],
            out_dim: weight.shape()[0],
            weight,
            bias,
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_dim] {
            return Err(Error::ShapeMismatch {
                op: "linear.output_shape",
                expected: vec![self.in_dim],
                got: input.to_vec(),
            });
        }
        Ok(vec![self.out_dim])
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let batch = x.batch();
        if x.sample_len() != self.in_dim {
            return Err(Error::ShapeMismatch {
                op: "linear.forward",
                expected: vec![self.in_dim],
                got: x.shape().to_vec(),
            });
        }
        let w = self.weight.values();
        let b = self.bias.values();
        let mut out = vec![T::zero(); batch * self.out_dim];
        for bi in 0..batch {
            let xr = x.row(bi);
            let yr = &mut out[bi * self.out_dim..(bi + 1) * self.out_dim];
            for (o, y) in yr.iter_mut().enumerate() {
                let wr = &w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = b[o];
                for (xi, wi) in xr.iter().zip(wr) {
                    acc += *xi * *wi;
                }
                *y = acc;
            }
        }
        Tensor::new(vec![batch, self.out_dim], out)
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply(x)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::MissingForward { op: "linear" })?;
        let batch = x.batch();
        if dy.batch() != batch || dy.sample_len() != self.out_dim {
            return Err(Error::ShapeMismatch {
                op: "linear.backward",
                expected: vec![batch, self.out_dim],
                got: dy.shape().to_vec(),
            });
        }

        let mut dw = vec![T::zero(); self.out_dim * self.in_dim];
        let mut db = vec![T::zero(); self.out_dim];
        let mut dx = vec![T::zero(); batch * self.in_dim];
        let w = self.weight.values();
        for bi in 0..batch {
            let xr = x.row(bi);
            let gr = dy.row(bi);
            let dxr = &mut dx[bi * self.in_dim..(bi + 1) * self.in_dim];
            for (o, g) in gr.iter().enumerate() {
                db[o] += *g;
                let wr = &w[o * self.in_dim..(o + 1) * self.in_dim];
                let dwr = &mut dw[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    dwr[i] += *g * xr[i];
                    dxr[i] += *g * wr[i];
                }
            }
        }
        self.weight.accumulate_grad(&dw);
        self.bias.accumulate_grad(&db);
        Tensor::new(vec![batch, self.in_dim], dx)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// One multiply-accumulate = 2 FLOPs, plus one bias add per output.
    pub fn flops(&self) -> u64 {
        (2 * self.in_dim * self.out_dim + self.out_dim) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        // Linear(2→2), W = I, b = 0 on [3,4] → [3,4].
        let w = Tensor::new(vec![2, 2], vec![1.0f64, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(vec![2]);
        let layer = Linear::from_parts(w, b).unwrap();
        let x = Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        let y = layer.infer(&x).unwrap();
        assert_eq!(y.values(), &[3.0, 4.0]);
    }

    #[test]
    fn scalar_chain_rule_gradients() {
        // Linear(1→1), w=2, b=0, input 3, loss = output: dW = 3, dx = 2.
        let w = Tensor::new(vec![1, 1], vec![2.0f64]).unwrap();
        let b = Tensor::zeros(vec![1]);
        let mut layer = Linear::from_parts(w, b).unwrap();
        let x = Tensor::new(vec![1, 1], vec![3.0]).unwrap();
        let y = layer.forward_t(&x).unwrap();
        assert_eq!(y.values(), &[6.0]);
        let dy = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let dx = layer.backward(&dy).unwrap();
        assert_eq!(layer.weight.grad().unwrap(), &[3.0]);
        assert_eq!(layer.bias.grad().unwrap(), &[1.0]);
        assert_eq!(dx.values(), &[2.0]);
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let w = Tensor::new(vec![1, 1], vec![2.0f64]).unwrap();
        let mut layer = Linear::from_parts(w, Tensor::zeros(vec![1])).unwrap();
        let dy = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(layer.backward(&dy).is_err());
    }

    #[test]
    fn flops_follow_the_mac_convention() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let layer: Linear<f64> = Linear::new(7, 16, &mut rng);
        assert_eq!(layer.flops(), 240);
    }

    use rand::SeedableRng;
}
