//! One-dimensional convolution and transposed convolution, stride 1.
//!
//! `Conv1d` zero-pads symmetrically; output length is `L + 2·pad − k + 1`.
//! `ConvTranspose1d` is the adjoint map with no padding; output length is
//! `L + k − 1`. Both operate on `[batch, channels, length]` tensors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::tensor::Tensor;

fn uniform_init<T: Scalar, R: Rng + ?Sized>(n: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let bound = real::<T>(1.0) / real::<T>(fan_in as f64).sqrt();
    (0..n)
        .map(|_| {
            let u: T = real(rng.gen_range(-1.0f64..1.0));
            u * bound
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Conv1d<T: Scalar> {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    padding: usize,
    /// Kernel weights, row-major `[out_ch, in_ch, kernel]`.
    pub(crate) weight: Tensor<T>,
    /// Bias `[out_ch]`.
    pub(crate) bias: Tensor<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_ch * kernel;
        let weight = Tensor::new(
            vec![out_ch, in_ch, kernel],
            uniform_init(out_ch * in_ch * kernel, fan_in, rng),
        )
        .unwrap();
        let bias = Tensor::new(vec![out_ch], uniform_init(out_ch, fan_in, rng)).unwrap();
        Self {
            in_ch,
            out_ch,
            kernel,
            padding,
            weight,
            bias,
            cache: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, padding: usize) -> Result<Self> {
        if weight.shape().len() != 3 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch {
                op: "conv1d.from_parts",
                expected: vec![3],
                got: weight.shape().to_vec(),
            });
        }
        Ok(Self {
            in_ch: weight.shape()[1],
            out_ch: weight.shape()[0],
            kernel: weight.shape()[2],
            padding,
            weight,
            bias,
            cache: None,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.in_ch, self.out_ch, self.kernel, self.padding)
    }

    fn out_len(&self, l_in: usize) -> Result<usize> {
        let padded = l_in + 2 * self.padding;
        if padded + 1 <= self.kernel {
            return Err(Error::InvalidConfig(format!(
                "conv1d kernel {} does not fit input length {} with padding {}",
                self.kernel, l_in, self.padding
            )));
        }
        Ok(padded - self.kernel + 1)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 || input[0] != self.in_ch {
            return Err(Error::ShapeMismatch {
                op: "conv1d.output_shape",
                expected: vec![self.in_ch, 0],
                got: input.to_vec(),
            });
        }
        Ok(vec![self.out_ch, self.out_len(input[1])?])
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = x.shape();
        if shape.len() != 3 || shape[1] != self.in_ch {
            return Err(Error::ShapeMismatch {
                op: "conv1d.forward",
                expected: vec![0, self.in_ch, 0],
                got: shape.to_vec(),
            });
        }
        let (batch, l_in) = (shape[0], shape[2]);
        let l_out = self.out_len(l_in)?;
        let w = self.weight.values();
        let b = self.bias.values();
        let xs = x.values();
        let mut out = vec![T::zero(); batch * self.out_ch * l_out];
        let pad = self.padding as isize;
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let y_base = (bi * self.out_ch + oc) * l_out;
                for j in 0..l_out {
                    let mut acc = b[oc];
                    for ic in 0..self.in_ch {
                        let x_base = (bi * self.in_ch + ic) * l_in;
                        let w_base = (oc * self.in_ch + ic) * self.kernel;
                        for t in 0..self.kernel {
                            let i = j as isize + t as isize - pad;
                            if i >= 0 && (i as usize) < l_in {
                                acc += w[w_base + t] * xs[x_base + i as usize];
                            }
                        }
                    }
                    out[y_base + j] = acc;
                }
            }
        }
        Tensor::new(vec![batch, self.out_ch, l_out], out)
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
        let x = self.cache.take().ok_or(Error::MissingForward { op: "conv1d" })?;
        let (batch, l_in) = (x.shape()[0], x.shape()[2]);
        let l_out = self.out_len(l_in)?;
        if dy.shape() != [batch, self.out_ch, l_out] {
            return Err(Error::ShapeMismatch {
                op: "conv1d.backward",
                expected: vec![batch, self.out_ch, l_out],
                got: dy.shape().to_vec(),
            });
        }
        let w = self.weight.values();
        let xs = x.values();
        let gs = dy.values();
        let mut dw = vec![T::zero(); w.len()];
        let mut db = vec![T::zero(); self.out_ch];
        let mut dx = vec![T::zero(); xs.len()];
        let pad = self.padding as isize;
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let y_base = (bi * self.out_ch + oc) * l_out;
                for j in 0..l_out {
                    let g = gs[y_base + j];
                    db[oc] += g;
                    for ic in 0..self.in_ch {
                        let x_base = (bi * self.in_ch + ic) * l_in;
                        let w_base = (oc * self.in_ch + ic) * self.kernel;
                        for t in 0..self.kernel {
                            let i = j as isize + t as isize - pad;
                            if i >= 0 && (i as usize) < l_in {
                                dw[w_base + t] += g * xs[x_base + i as usize];
                                dx[x_base + i as usize] += g * w[w_base + t];
                            }
                        }
                    }
                }
            }
        }
        self.weight.accumulate_grad(&dw);
        self.bias.accumulate_grad(&db);
        Tensor::new(vec![batch, self.in_ch, l_in], dx)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Full-kernel MAC count; edge taps falling into the padding are counted.
    pub fn flops(&self, input: &[usize]) -> u64 {
        let l_out = self.out_len(input[1]).unwrap_or(0);
        (self.out_ch * l_out * (2 * self.in_ch * self.kernel + 1)) as u64
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1d<T: Scalar> {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    /// Kernel weights, row-major `[in_ch, out_ch, kernel]`.
    pub(crate) weight: Tensor<T>,
    /// Bias `[out_ch]`.
    pub(crate) bias: Tensor<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> ConvTranspose1d<T> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_ch * kernel;
        let weight = Tensor::new(
            vec![in_ch, out_ch, kernel],
            uniform_init(in_ch * out_ch * kernel, fan_in, rng),
        )
        .unwrap();
        let bias = Tensor::new(vec![out_ch], uniform_init(out_ch, fan_in, rng)).unwrap();
        Self {
            in_ch,
            out_ch,
            kernel,
            weight,
            bias,
            cache: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 3 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::ShapeMismatch {
                op: "convtranspose1d.from_parts",
                expected: vec![3],
                got: weight.shape().to_vec(),
            });
        }
        Ok(Self {
            in_ch: weight.shape()[0],
            out_ch: weight.shape()[1],
            kernel: weight.shape()[2],
            weight,
            bias,
            cache: None,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.in_ch, self.out_ch, self.kernel)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 || input[0] != self.in_ch {
            return Err(Error::ShapeMismatch {
                op: "convtranspose1d.output_shape",
                expected: vec![self.in_ch, 0],
                got: input.to_vec(),
            });
        }
        Ok(vec![self.out_ch, input[1] + self.kernel - 1])
    }

    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = x.shape();
        if shape.len() != 3 || shape[1] != self.in_ch {
            return Err(Error::ShapeMismatch {
                op: "convtranspose1d.forward",
                expected: vec![0, self.in_ch, 0],
                got: shape.to_vec(),
            });
        }
        let (batch, l_in) = (shape[0], shape[2]);
        let l_out = l_in + self.kernel - 1;
        let w = self.weight.values();
        let b = self.bias.values();
        let xs = x.values();
        let mut out = vec![T::zero(); batch * self.out_ch * l_out];
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let y_base = (bi * self.out_ch + oc) * l_out;
                for j in y_base..y_base + l_out {
                    out[j] = b[oc];
                }
                for ic in 0..self.in_ch {
                    let x_base = (bi * self.in_ch + ic) * l_in;
                    let w_base = (ic * self.out_ch + oc) * self.kernel;
                    for i in 0..l_in {
                        let xv = xs[x_base + i];
                        for t in 0..self.kernel {
                            out[y_base + i + t] += xv * w[w_base + t];
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch, self.out_ch, l_out], out)
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
        let x = self
            .cache
            .take()
            .ok_or(Error::MissingForward { op: "convtranspose1d" })?;
        let (batch, l_in) = (x.shape()[0], x.shape()[2]);
        let l_out = l_in + self.kernel - 1;
        if dy.shape() != [batch, self.out_ch, l_out] {
            return Err(Error::ShapeMismatch {
                op: "convtranspose1d.backward",
                expected: vec![batch, self.out_ch, l_out],
                got: dy.shape().to_vec(),
            });
        }
        let w = self.weight.values();
        let xs = x.values();
        let gs = dy.values();
        let mut dw = vec![T::zero(); w.len()];
        let mut db = vec![T::zero(); self.out_ch];
        let mut dx = vec![T::zero(); xs.len()];
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let y_base = (bi * self.out_ch + oc) * l_out;
                for j in 0..l_out {
                    db[oc] += gs[y_base + j];
                }
                for ic in 0..self.in_ch {
                    let x_base = (bi * self.in_ch + ic) * l_in;
                    let w_base = (ic * self.out_ch + oc) * self.kernel;
                    for i in 0..l_in {
                        let xv = xs[x_base + i];
                        let mut acc = T::zero();
                        for t in 0..self.kernel {
                            let g = gs[y_base + i + t];
                            dw[w_base + t] += xv * g;
                            acc += w[w_base + t] * g;
                        }
                        dx[x_base + i] += acc;
                    }
                }
            }
        }
        self.weight.accumulate_grad(&dw);
        self.bias.accumulate_grad(&db);
        Tensor::new(vec![batch, self.in_ch, l_in], dx)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn flops(&self, input: &[usize]) -> u64 {
        let l_in = input[1];
        let l_out = l_in + self.kernel - 1;
        (2 * self.in_ch * self.out_ch * self.kernel * l_in + self.out_ch * l_out) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_convolution_with_zero_padding() {
        // Conv1d(1→1, kernel 3, padding 1), w = [1,1,1], b = 0 on [1,2,3] → [3,6,5].
        let w = Tensor::new(vec![1, 1, 3], vec![1.0f64, 1.0, 1.0]).unwrap();
        let conv = Conv1d::from_parts(w, Tensor::zeros(vec![1]), 1).unwrap();
        let x = Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = conv.infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3]);
        assert_eq!(y.values(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn transpose_expands_length_by_kernel_minus_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let tconv: ConvTranspose1d<f64> = ConvTranspose1d::new(2, 6, 4, &mut rng);
        let x = Tensor::randn(vec![5, 2, 4], &mut rng);
        let y = tconv.infer(&x).unwrap();
        assert_eq!(y.shape(), &[5, 6, 7]);
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, conv_transpose(y)> when both share the kernel
        // (zero padding, zero bias). Checked on a small random instance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let kernel = Tensor::randn(vec![3, 2, 4], &mut rng); // [oc=3, ic=2, k=4]
        let conv = Conv1d::from_parts(kernel.clone(), Tensor::zeros(vec![3]), 0).unwrap();

        // Transposed layer runs the map the other way: [ic=3, oc=2, k=4].
        // The scatter form is the adjoint of the correlation form with the
        // same taps, so the weight buffer carries over unchanged.
        let tconv = ConvTranspose1d::<f64>::from_parts(
            Tensor::new(vec![3, 2, 4], kernel.values().to_vec()).unwrap(),
            Tensor::zeros(vec![2]),
        )
        .unwrap();

        let x = Tensor::randn(vec![1, 2, 9], &mut rng); // conv: [1,2,9] → [1,3,6]
        let y = Tensor::randn(vec![1, 3, 6], &mut rng);
        let cx = conv.infer(&x).unwrap();
        let ty = tconv.infer(&y).unwrap(); // [1,3,6] → [1,2,9]
        let lhs: f64 = cx.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.values().iter().zip(ty.values()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    use rand::SeedableRng;
}
