//! RMSprop and Adam parameter updates, plus weight clipping.
//!
//! Optimizer state mirrors the stack's parameter visit order; an optimizer
//! instance therefore belongs to exactly one stack.

use crate::error::{Error, Result};
use crate::nn::LayerStack;
use crate::scalar::{real, Scalar};

#[derive(Debug, Clone)]
enum Kind<T: Scalar> {
    RmsProp {
        lr: T,
        decay: T,
        eps: T,
        /// Squared-gradient accumulator per parameter tensor.
        sq_avg: Vec<Vec<T>>,
    },
    Adam {
        lr: T,
        beta1: T,
        beta2: T,
        eps: T,
        step: u64,
        m: Vec<Vec<T>>,
        v: Vec<Vec<T>>,
    },
}

#[derive(Debug, Clone)]
pub struct Optimizer<T: Scalar> {
    kind: Kind<T>,
}

impl<T: Scalar> Optimizer<T> {
    /// `w ← w − lr·g/√(acc + eps)` with `acc ← decay·acc + (1−decay)·g²`.
    pub fn rmsprop(lr: T, decay: T, eps: T) -> Result<Self> {
        if lr <= T::zero() {
            return Err(Error::InvalidConfig("rmsprop lr must be positive".into()));
        }
        Ok(Self {
            kind: Kind::RmsProp {
                lr,
                decay,
                eps,
                sq_avg: Vec::new(),
            },
        })
    }

    /// Bias-corrected Adam: `w ← w − lr·m̂/(√v̂ + eps)`.
    pub fn adam(lr: T, beta1: T, beta2: T, eps: T) -> Result<Self> {
        if lr <= T::zero() {
            return Err(Error::InvalidConfig("adam lr must be positive".into()));
        }
        Ok(Self {
            kind: Kind::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        })
    }

    pub fn adam_default(lr: T) -> Result<Self> {
        Self::adam(lr, real(0.9), real(0.999), real(1e-8))
    }

    /// Applies one update to every parameter of `stack`, then clears the
    /// gradients. Errors if any parameter has no gradient.
    pub fn step(&mut self, stack: &mut LayerStack<T>) -> Result<()> {
        let mut missing: Option<String> = None;
        stack.visit_params(&mut |idx, tag, t| {
            if t.grad().is_none() && missing.is_none() {
                missing = Some(format!("{idx}.{tag}"));
            }
        });
        if let Some(name) = missing {
            return Err(Error::MissingGradient(name));
        }

        match &mut self.kind {
            Kind::RmsProp {
                lr,
                decay,
                eps,
                sq_avg,
            } => {
                let (lr, decay, eps) = (*lr, *decay, *eps);
                let mut pi = 0usize;
                stack.visit_params_mut(&mut |_, _, t| {
                    if sq_avg.len() <= pi {
                        sq_avg.push(vec![T::zero(); t.len()]);
                    }
                    let acc = &mut sq_avg[pi];
                    let (vals, grad) = t.values_and_grad();
                    let grad = grad.unwrap();
                    for i in 0..vals.len() {
                        let g = grad[i];
                        acc[i] = decay * acc[i] + (T::one() - decay) * g * g;
                        vals[i] -= lr * g / (acc[i] + eps).sqrt();
                    }
                    t.clear_grad();
                    pi += 1;
                });
            }
            Kind::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let (lr, beta1, beta2, eps) = (*lr, *beta1, *beta2, *eps);
                let t_f = real::<T>(*step as f64);
                let bc1 = T::one() - beta1.powf(t_f);
                let bc2 = T::one() - beta2.powf(t_f);
                let mut pi = 0usize;
                stack.visit_params_mut(&mut |_, _, t| {
                    if m.len() <= pi {
                        m.push(vec![T::zero(); t.len()]);
                        v.push(vec![T::zero(); t.len()]);
                    }
                    let (vals, grad) = t.values_and_grad();
                    let grad = grad.unwrap();
                    for i in 0..vals.len() {
                        let g = grad[i];
                        m[pi][i] = beta1 * m[pi][i] + (T::one() - beta1) * g;
                        v[pi][i] = beta2 * v[pi][i] + (T::one() - beta2) * g * g;
                        let m_hat = m[pi][i] / bc1;
                        let v_hat = v[pi][i] / bc2;
                        vals[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    t.clear_grad();
                    pi += 1;
                });
            }
        }
        Ok(())
    }
}

/// Clamps every parameter of `stack` to `[−c, c]`. Idempotent.
pub fn clip_weights<T: Scalar>(stack: &mut LayerStack<T>, c: T) -> Result<()> {
    if c <= T::zero() {
        return Err(Error::InvalidConfig("clip bound must be positive".into()));
    }
    stack.visit_params_mut(&mut |_, _, t| {
        for v in t.values_mut() {
            if *v > c {
                *v = c;
            } else if *v < -c {
                *v = -c;
            }
        }
    });
    Ok(())
}

/// Largest parameter magnitude in the stack.
pub fn max_abs_weight<T: Scalar>(stack: &LayerStack<T>) -> T {
    let mut max = T::zero();
    stack.visit_params(&mut |_, _, t| {
        for v in t.values() {
            max = max.max(v.abs());
        }
    });
    max
}
