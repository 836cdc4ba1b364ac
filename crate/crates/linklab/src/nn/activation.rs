//! Elementwise activations and the row-wise log-softmax.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu<T: Scalar> {
    cache: Option<Vec<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    fn apply(x: &Tensor<T>) -> Tensor<T> {
        let mut out = x.clone();
        for v in out.values_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        out.clear_grad();
        out
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.values().to_vec());
        Ok(Self::apply(x))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Self::apply(x))
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::MissingForward { op: "relu" })?;
        let mut dx = dy.clone();
        dx.clear_grad();
        for (g, xi) in dx.values_mut().iter_mut().zip(&x) {
            if *xi <= T::zero() {
                *g = T::zero();
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub struct LeakyRelu<T: Scalar> {
    slope: T,
    cache: Option<Vec<T>>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: T) -> Result<Self> {
        if slope <= T::zero() || slope >= T::one() {
            return Err(Error::InvalidConfig(format!(
                "leaky relu slope must lie in (0,1), got {slope}"
            )));
        }
        Ok(Self { slope, cache: None })
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    fn apply(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut out = x.clone();
        for v in out.values_mut() {
            if *v < T::zero() {
                *v = *v * self.slope;
            }
        }
        out.clear_grad();
        out
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.values().to_vec());
        Ok(self.apply(x))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.apply(x))
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "leakyrelu" })?;
        let mut dx = dy.clone();
        dx.clear_grad();
        for (g, xi) in dx.values_mut().iter_mut().zip(&x) {
            if *xi <= T::zero() {
                *g = *g * self.slope;
            }
        }
        Ok(dx)
    }
}

/// Exponential linear unit with α = 1.
#[derive(Debug, Clone, Default)]
pub struct Elu<T: Scalar> {
    cache: Option<Vec<T>>,
}

impl<T: Scalar> Elu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    fn apply(x: &Tensor<T>) -> Tensor<T> {
        let mut out = x.clone();
        for v in out.values_mut() {
            if *v < T::zero() {
                *v = v.exp() - T::one();
            }
        }
        out.clear_grad();
        out
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.values().to_vec());
        Ok(Self::apply(x))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Self::apply(x))
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::MissingForward { op: "elu" })?;
        let mut dx = dy.clone();
        dx.clear_grad();
        for (g, xi) in dx.values_mut().iter_mut().zip(&x) {
            if *xi <= T::zero() {
                *g = *g * xi.exp();
            }
        }
        Ok(dx)
    }
}

/// Row-wise log-softmax over the last axis of a `[batch, n]` tensor.
#[derive(Debug, Clone, Default)]
pub struct LogSoftmax<T: Scalar> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> LogSoftmax<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    fn apply(x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "logsoftmax.forward",
                expected: vec![0, 0],
                got: x.shape().to_vec(),
            });
        }
        let mut out = x.clone();
        out.clear_grad();
        let n = out.sample_len();
        for bi in 0..out.batch() {
            let row = out.row_mut(bi);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for v in row.iter() {
                sum += (*v - max).exp();
            }
            let log_z = max + sum.ln();
            for v in row.iter_mut() {
                *v -= log_z;
            }
            debug_assert_eq!(row.len(), n);
        }
        Ok(out)
    }

    pub fn forward_t(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = Self::apply(x)?;
        self.cache = Some(y.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Self::apply(x)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "logsoftmax" })?;
        let mut dx = dy.clone();
        dx.clear_grad();
        for bi in 0..y.batch() {
            let gsum: T = dy.row(bi).iter().copied().sum();
            let yr = y.row(bi);
            for (g, yi) in dx.row_mut(bi).iter_mut().zip(yr) {
                *g -= yi.exp() * gsum;
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn relu_gates_the_gradient() {
        // ReLU at input [−1, 2] with output grad [1, 1] → input grad [0, 1].
        let mut relu = Relu::new();
        let x = Tensor::new(vec![1, 2], vec![-1.0f64, 2.0]).unwrap();
        let y = relu.forward_t(&x).unwrap();
        assert_eq!(y.values(), &[0.0, 2.0]);
        let dx = relu
            .backward(&Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(dx.values(), &[0.0, 1.0]);
    }

    #[test]
    fn log_softmax_of_uniform_logits() {
        // LogSoftmax on [0,0,0,0] → all entries −ln 4.
        let ls = LogSoftmax::new();
        let x = Tensor::new(vec![1, 4], vec![0.0f64; 4]).unwrap();
        let y = ls.infer(&x).unwrap();
        for v in y.values() {
            assert_relative_eq!(*v, -(4.0f64.ln()), epsilon = 1e-12);
        }
    }

    #[test]
    fn log_softmax_rows_exponentiate_to_one() {
        let ls = LogSoftmax::new();
        let x = Tensor::new(vec![2, 3], vec![1.0f64, -2.0, 0.5, 10.0, 10.0, -30.0]).unwrap();
        let y = ls.infer(&x).unwrap();
        for bi in 0..2 {
            let s: f64 = y.row(bi).iter().map(|v| v.exp()).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn leaky_slope_must_be_in_open_interval() {
        assert!(LeakyRelu::<f64>::new(0.0).is_err());
        assert!(LeakyRelu::<f64>::new(1.0).is_err());
        assert!(LeakyRelu::<f64>::new(0.2).is_ok());
    }

    #[test]
    fn elu_is_smooth_at_negative_inputs() {
        let elu = Elu::new();
        let x = Tensor::new(vec![1, 2], vec![-1.0f64, 1.0]).unwrap();
        let y = elu.infer(&x).unwrap();
        assert_relative_eq!(y.values()[0], (-1.0f64).exp() - 1.0, epsilon = 1e-12);
        assert_eq!(y.values()[1], 1.0);
    }

}
