//! Dense row-major tensor with an optional gradient buffer.
//!
//! This is the substrate every network in the crate runs on: 1-D parameter
//! vectors, 2-D `[batch, features]` activations and 3-D `[batch, channels,
//! length]` convolution inputs. Values must stay finite; any op that produces
//! a NaN or infinity reports a hard error rather than letting it propagate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    shape: Vec<usize>,
    values: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    /// Builds a tensor, checking length and finiteness.
    pub fn new(shape: impl Into<Vec<usize>>, values: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                expected: shape,
                got: vec![values.len()],
            });
        }
        let t = Self {
            shape,
            values,
            grad: None,
        };
        t.check_finite("Tensor::new")?;
        Ok(t)
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self {
            shape,
            values: vec![T::zero(); n],
            grad: None,
        }
    }

    pub fn filled(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self {
            shape,
            values: vec![value; n],
            grad: None,
        }
    }

    /// I.i.d. standard-normal entries.
    pub fn randn<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, rng: &mut R) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| T::standard_normal(rng)).collect();
        Self {
            shape,
            values,
            grad: None,
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading extent, conventionally the batch size.
    #[inline]
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Elements per leading-axis entry.
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Row `i` of a tensor whose leading axis is the batch.
    pub fn row(&self, i: usize) -> &[T] {
        let w = self.sample_len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let w = self.sample_len();
        &mut self.values[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, zero-allocated on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.values.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn accumulate_grad(&mut self, delta: &[T]) {
        let g = self.grad_mut();
        debug_assert_eq!(g.len(), delta.len());
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += *di;
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Mutable values alongside the (read-only) gradient buffer.
    pub fn values_and_grad(&mut self) -> (&mut [T], Option<&[T]>) {
        (&mut self.values, self.grad.as_deref())
    }

    /// Reinterprets the buffer under a new shape of identical volume.
    pub fn reshaped(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::reshaped",
                expected: shape,
                got: self.shape.clone(),
            });
        }
        self.shape = shape;
        self.grad = None;
        Ok(self)
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    /// Mean of squared entries (per-symbol power of a signal tensor).
    pub fn mean_square(&self) -> T {
        if self.values.is_empty() {
            return T::zero();
        }
        let sum: T = self.values.iter().map(|v| *v * *v).sum();
        sum / T::from_usize(self.values.len()).unwrap()
    }

    /// Elementwise in-place scaling.
    pub fn scale(&mut self, factor: T) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}
