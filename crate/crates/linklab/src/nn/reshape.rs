//! Per-sample reshape; the batch axis is untouched.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Reshape {
    target: Vec<usize>,
    cache: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(target: impl Into<Vec<usize>>) -> Self {
        Self {
            target: target.into(),
            cache: None,
        }
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let in_volume: usize = input.iter().product();
        let out_volume: usize = self.target.iter().product();
        if in_volume != out_volume {
            return Err(Error::ShapeMismatch {
                op: "reshape.output_shape",
                expected: self.target.clone(),
                got: input.to_vec(),
            });
        }
        Ok(self.target.clone())
    }

    fn shaped<T: Scalar>(&self, x: &Tensor<T>, op: &'static str) -> Result<Tensor<T>> {
        let volume: usize = self.target.iter().product();
        if x.sample_len() != volume {
            return Err(Error::ShapeMismatch {
                op,
                expected: self.target.clone(),
                got: x.shape().to_vec(),
            });
        }
        let mut shape = vec![x.batch()];
        shape.extend_from_slice(&self.target);
        x.clone().reshaped(shape)
    }

    pub fn forward_t<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.shape().to_vec());
        self.shaped(x, "reshape.forward")
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.shaped(x, "reshape.infer")
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "reshape" })?;
        dy.clone().reshaped(shape)
    }
}
