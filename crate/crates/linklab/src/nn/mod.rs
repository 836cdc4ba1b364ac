//! Sequential network core.
//!
//! A [`LayerStack`] is a fixed, ordered sequence of layers with validated
//! shape propagation. Training-mode forwards cache whatever each layer needs
//! for its backward pass; a stack therefore belongs to one logical thread
//! while it is being trained. Inference (`infer`) is `&self`, caches nothing
//! and may be shared across parallel workers.
//!
//! There is no general autograd graph here. The four networks in this crate
//! are all plain sequences, and explicit forward/backward pairs per layer
//! keep the gradient path auditable against finite differences.

mod activation;
mod batchnorm;
mod conv;
mod dropout;
mod linear;
mod reshape;

pub use activation::{Elu, LeakyRelu, LogSoftmax, Relu};
pub use batchnorm::{BatchNorm1d, BN_EPS, BN_MOMENTUM};
pub use conv::{Conv1d, ConvTranspose1d};
pub use dropout::Dropout;
pub use linear::Linear;
pub use reshape::Reshape;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum Layer<T: Scalar> {
    Linear(Linear<T>),
    Conv1d(Conv1d<T>),
    ConvTranspose1d(ConvTranspose1d<T>),
    BatchNorm1d(BatchNorm1d<T>),
    Relu(Relu<T>),
    LeakyRelu(LeakyRelu<T>),
    Elu(Elu<T>),
    Dropout(Dropout<T>),
    LogSoftmax(LogSoftmax<T>),
    Reshape(Reshape),
}

impl<T: Scalar> Layer<T> {
    pub fn op_name(&self) -> &'static str {
        match self {
            Layer::Linear(_) => "linear",
            Layer::Conv1d(_) => "conv1d",
            Layer::ConvTranspose1d(_) => "convtranspose1d",
            Layer::BatchNorm1d(_) => "batchnorm1d",
            Layer::Relu(_) => "relu",
            Layer::LeakyRelu(_) => "leakyrelu",
            Layer::Elu(_) => "elu",
            Layer::Dropout(_) => "dropout",
            Layer::LogSoftmax(_) => "logsoftmax",
            Layer::Reshape(_) => "reshape",
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Linear(l) => l.output_shape(input),
            Layer::Conv1d(l) => l.output_shape(input),
            Layer::ConvTranspose1d(l) => l.output_shape(input),
            Layer::BatchNorm1d(l) => l.output_shape(input),
            Layer::Reshape(l) => l.output_shape(input),
            Layer::LogSoftmax(_) => {
                if input.len() != 1 {
                    return Err(Error::ShapeMismatch {
                        op: "logsoftmax.output_shape",
                        expected: vec![0],
                        got: input.to_vec(),
                    });
                }
                Ok(input.to_vec())
            }
            _ => Ok(input.to_vec()),
        }
    }

    pub fn forward_t<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, rng: &mut R) -> Result<Tensor<T>> {
        match self {
            Layer::Linear(l) => l.forward_t(x),
            Layer::Conv1d(l) => l.forward_t(x),
            Layer::ConvTranspose1d(l) => l.forward_t(x),
            Layer::BatchNorm1d(l) => l.forward_t(x),
            Layer::Relu(l) => l.forward_t(x),
            Layer::LeakyRelu(l) => l.forward_t(x),
            Layer::Elu(l) => l.forward_t(x),
            Layer::Dropout(l) => l.forward_t(x, rng),
            Layer::LogSoftmax(l) => l.forward_t(x),
            Layer::Reshape(l) => l.forward_t(x),
        }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Linear(l) => l.infer(x),
            Layer::Conv1d(l) => l.infer(x),
            Layer::ConvTranspose1d(l) => l.infer(x),
            Layer::BatchNorm1d(l) => l.infer(x),
            Layer::Relu(l) => l.infer(x),
            Layer::LeakyRelu(l) => l.infer(x),
            Layer::Elu(l) => l.infer(x),
            Layer::Dropout(l) => l.infer(x),
            Layer::LogSoftmax(l) => l.infer(x),
            Layer::Reshape(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Linear(l) => l.backward(dy),
            Layer::Conv1d(l) => l.backward(dy),
            Layer::ConvTranspose1d(l) => l.backward(dy),
            Layer::BatchNorm1d(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::LeakyRelu(l) => l.backward(dy),
            Layer::Elu(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::LogSoftmax(l) => l.backward(dy),
            Layer::Reshape(l) => l.backward(dy),
        }
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(&'static str, &Tensor<T>)) {
        match self {
            Layer::Linear(l) => {
                f("weight", &l.weight);
                f("bias", &l.bias);
            }
            Layer::Conv1d(l) => {
                f("weight", &l.weight);
                f("bias", &l.bias);
            }
            Layer::ConvTranspose1d(l) => {
                f("weight", &l.weight);
                f("bias", &l.bias);
            }
            Layer::BatchNorm1d(l) => {
                f("gamma", &l.gamma);
                f("beta", &l.beta);
            }
            _ => {}
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&'static str, &mut Tensor<T>)) {
        match self {
            Layer::Linear(l) => {
                f("weight", &mut l.weight);
                f("bias", &mut l.bias);
            }
            Layer::Conv1d(l) => {
                f("weight", &mut l.weight);
                f("bias", &mut l.bias);
            }
            Layer::ConvTranspose1d(l) => {
                f("weight", &mut l.weight);
                f("bias", &mut l.bias);
            }
            Layer::BatchNorm1d(l) => {
                f("gamma", &mut l.gamma);
                f("beta", &mut l.beta);
            }
            _ => {}
        }
    }

    pub fn visit_state(&self, f: &mut dyn FnMut(&'static str, &Tensor<T>)) {
        if let Layer::BatchNorm1d(l) = self {
            f("running_mean", &l.running_mean);
            f("running_var", &l.running_var);
        }
    }

    pub fn visit_state_mut(&mut self, f: &mut dyn FnMut(&'static str, &mut Tensor<T>)) {
        if let Layer::BatchNorm1d(l) = self {
            f("running_mean", &mut l.running_mean);
            f("running_var", &mut l.running_var);
        }
    }

    /// Forward-pass FLOPs for one sample under the crate convention:
    /// a multiply-accumulate is 2 FLOPs and a bias add 1; elementwise
    /// activations cost 1 per element (log-softmax 3); batch norm folds to a
    /// scale-and-shift (2 per element); dropout and reshape are free.
    pub fn flops(&self, input: &[usize]) -> u64 {
        let elems: usize = input.iter().product();
        match self {
            Layer::Linear(l) => l.flops(),
            Layer::Conv1d(l) => l.flops(input),
            Layer::ConvTranspose1d(l) => l.flops(input),
            Layer::BatchNorm1d(l) => l.flops(),
            Layer::Relu(_) | Layer::LeakyRelu(_) | Layer::Elu(_) => elems as u64,
            Layer::LogSoftmax(_) => 3 * elems as u64,
            Layer::Dropout(_) | Layer::Reshape(_) => 0,
        }
    }

    /// Compact textual form, parseable by [`Layer::parse`].
    pub fn spec_string(&self) -> String {
        match self {
            Layer::Linear(l) => format!("linear({},{})", l.in_dim(), l.out_dim()),
            Layer::Conv1d(l) => {
                let (ic, oc, k, p) = l.dims();
                format!("conv1d({ic},{oc},{k},{p})")
            }
            Layer::ConvTranspose1d(l) => {
                let (ic, oc, k) = l.dims();
                format!("convtranspose1d({ic},{oc},{k})")
            }
            Layer::BatchNorm1d(l) => format!("batchnorm1d({})", l.features()),
            Layer::Relu(_) => "relu".into(),
            Layer::LeakyRelu(l) => format!("leakyrelu({})", l.slope().to_f64().unwrap()),
            Layer::Elu(_) => "elu".into(),
            Layer::Dropout(l) => format!("dropout({})", l.rate().to_f64().unwrap()),
            Layer::LogSoftmax(_) => "logsoftmax".into(),
            Layer::Reshape(l) => format!(
                "reshape({})",
                l.target()
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("x")
            ),
        }
    }

    /// Rebuilds a layer from its spec string with zeroed parameters; loading
    /// code fills parameter and state values afterwards.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(format!("bad layer spec `{spec}`: {msg}"));
        let (name, args) = match spec.find('(') {
            Some(open) => {
                let close = spec.rfind(')').ok_or_else(|| bad("missing `)`"))?;
                let args: Vec<&str> = spec[open + 1..close].split(',').collect();
                (&spec[..open], args)
            }
            None => (spec, Vec::new()),
        };
        let usize_arg = |i: usize| -> Result<usize> {
            args.get(i)
                .and_then(|s| s.trim().parse::<usize>().ok())
                .ok_or_else(|| bad("integer argument"))
        };
        let float_arg = |i: usize| -> Result<T> {
            args.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .map(real::<T>)
                .ok_or_else(|| bad("float argument"))
        };
        match name {
            "linear" => {
                let (i, o) = (usize_arg(0)?, usize_arg(1)?);
                let weight = Tensor::zeros(vec![o, i]);
                let bias = Tensor::zeros(vec![o]);
                Ok(Layer::Linear(Linear::from_parts(weight, bias)?))
            }
            "conv1d" => {
                let (ic, oc, k, p) = (usize_arg(0)?, usize_arg(1)?, usize_arg(2)?, usize_arg(3)?);
                let weight = Tensor::zeros(vec![oc, ic, k]);
                let bias = Tensor::zeros(vec![oc]);
                Ok(Layer::Conv1d(Conv1d::from_parts(weight, bias, p)?))
            }
            "convtranspose1d" => {
                let (ic, oc, k) = (usize_arg(0)?, usize_arg(1)?, usize_arg(2)?);
                let weight = Tensor::zeros(vec![ic, oc, k]);
                let bias = Tensor::zeros(vec![oc]);
                Ok(Layer::ConvTranspose1d(ConvTranspose1d::from_parts(
                    weight, bias,
                )?))
            }
            "batchnorm1d" => Ok(Layer::BatchNorm1d(BatchNorm1d::new(usize_arg(0)?))),
            "relu" => Ok(Layer::Relu(Relu::new())),
            "leakyrelu" => Ok(Layer::LeakyRelu(LeakyRelu::new(float_arg(0)?)?)),
            "elu" => Ok(Layer::Elu(Elu::new())),
            "dropout" => Ok(Layer::Dropout(Dropout::new(float_arg(0)?)?)),
            "logsoftmax" => Ok(Layer::LogSoftmax(LogSoftmax::new())),
            "reshape" => {
                let dims: Option<Vec<usize>> = args
                    .first()
                    .map(|s| s.split('x').map(|d| d.trim().parse::<usize>()).collect::<std::result::Result<_, _>>().ok())
                    .flatten();
                let dims = dims.ok_or_else(|| bad("reshape dims"))?;
                Ok(Layer::Reshape(Reshape::new(dims)))
            }
            other => Err(bad(&format!("unknown layer kind `{other}`"))),
        }
    }
}

/// Ordered sequence of layers with validated shape propagation.
#[derive(Debug, Clone)]
pub struct LayerStack<T: Scalar> {
    layers: Vec<Layer<T>>,
    /// Per-sample shapes between layers; `shapes[0]` is the declared input.
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> LayerStack<T> {
    pub fn new(input_shape: impl Into<Vec<usize>>, layers: Vec<Layer<T>>) -> Result<Self> {
        let input_shape = input_shape.into();
        let mut shapes = vec![input_shape];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(Self { layers, shapes })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layer_mut(&mut self, idx: usize) -> &mut Layer<T> {
        &mut self.layers[idx]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    fn check_input(&self, x: &Tensor<T>, op: &'static str) -> Result<()> {
        if x.shape().is_empty() || x.shape()[1..] != self.shapes[0][..] {
            return Err(Error::ShapeMismatch {
                op,
                expected: self.shapes[0].clone(),
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Training-mode forward: caches activations for [`Self::backward`].
    pub fn forward_t<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, rng: &mut R) -> Result<Tensor<T>> {
        self.check_input(x, "stack.forward")?;
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward_t(&cur, rng)?;
            cur.check_finite(layer.op_name())?;
        }
        Ok(cur)
    }

    /// Evaluation-mode forward: no caching, shareable across threads.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, "stack.infer")?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.infer(&cur)?;
            cur.check_finite(layer.op_name())?;
        }
        Ok(cur)
    }

    /// Backpropagates `output_grad`, accumulating parameter gradients, and
    /// returns the gradient with respect to the stack input.
    pub fn backward(&mut self, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
        let expected = self.output_shape().to_vec();
        if output_grad.shape().is_empty() || output_grad.shape()[1..] != expected[..] {
            return Err(Error::ShapeMismatch {
                op: "stack.backward",
                expected,
                got: output_grad.shape().to_vec(),
            });
        }
        let mut grad = output_grad.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
            grad.check_finite(layer.op_name())?;
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |_, _, p| p.clear_grad());
    }

    pub fn visit_params(&self, f: &mut dyn FnMut(usize, &'static str, &Tensor<T>)) {
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.visit_params(&mut |tag, t| f(idx, tag, t));
        }
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(usize, &'static str, &mut Tensor<T>)) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_params_mut(&mut |tag, t| f(idx, tag, t));
        }
    }

    pub fn visit_state(&self, f: &mut dyn FnMut(usize, &'static str, &Tensor<T>)) {
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.visit_state(&mut |tag, t| f(idx, tag, t));
        }
    }

    pub fn visit_state_mut(&mut self, f: &mut dyn FnMut(usize, &'static str, &mut Tensor<T>)) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_state_mut(&mut |tag, t| f(idx, tag, t));
        }
    }

    /// Number of trainable parameter entries. Batch-norm scale and shift
    /// count; running statistics do not.
    pub fn count_params(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, _, t| n += t.len());
        n
    }

    /// Forward-pass FLOPs for one sample; see [`Layer::flops`] for the
    /// counting convention.
    pub fn count_flops(&self) -> u64 {
        self.layers
            .iter()
            .zip(&self.shapes)
            .map(|(layer, input)| layer.flops(input))
            .sum()
    }

    /// Parseable architecture description, e.g.
    /// `in=16;linear(16,16);relu;linear(16,7);batchnorm1d(7)`.
    pub fn arch_string(&self) -> String {
        let mut parts = vec![format!(
            "in={}",
            self.shapes[0]
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x")
        )];
        parts.extend(self.layers.iter().map(Layer::spec_string));
        parts.join(";")
    }

    /// Rebuilds a stack (zeroed parameters) from [`Self::arch_string`] output.
    pub fn from_arch(arch: &str) -> Result<Self> {
        let mut parts = arch.split(';');
        let head = parts
            .next()
            .filter(|p| p.starts_with("in="))
            .ok_or_else(|| Error::Checkpoint(format!("bad arch string `{arch}`")))?;
        let input_shape: Vec<usize> = head[3..]
            .split('x')
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| Error::Checkpoint(format!("bad input shape in `{arch}`")))
            })
            .collect::<Result<_>>()?;
        let layers: Vec<Layer<T>> = parts.map(Layer::parse).collect::<Result<_>>()?;
        Self::new(input_shape, layers)
    }

    /// SHA-256 over all parameter values in visit order; used to prove a
    /// frozen network was not mutated.
    pub fn param_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        self.visit_params(&mut |idx, tag, t| {
            hasher.update((idx as u64).to_le_bytes());
            hasher.update(tag.as_bytes());
            for v in t.values() {
                hasher.update(v.to_f64().unwrap().to_bits().to_le_bytes());
            }
        });
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_stack() -> LayerStack<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        LayerStack::new(
            vec![4],
            vec![
                Layer::Linear(Linear::new(4, 6, &mut rng)),
                Layer::Relu(Relu::new()),
                Layer::Linear(Linear::new(6, 3, &mut rng)),
                Layer::LogSoftmax(LogSoftmax::new()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn shape_propagation_is_validated_at_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = LayerStack::<f64>::new(
            vec![4],
            vec![
                Layer::Linear(Linear::new(5, 6, &mut rng)), // wants input 5
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn forward_then_backward_round_trip() {
        let mut stack = small_stack();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(vec![8, 4], &mut rng);
        let y = stack.forward_t(&x, &mut rng).unwrap();
        assert_eq!(y.shape(), &[8, 3]);
        let dy = Tensor::filled(vec![8, 3], 0.1f64);
        let dx = stack.backward(&dy).unwrap();
        assert_eq!(dx.shape(), &[8, 4]);
        let mut saw_grads = 0;
        stack.visit_params(&mut |_, _, t| {
            if t.grad().is_some() {
                saw_grads += 1;
            }
        });
        assert_eq!(saw_grads, 4); // two linears × (weight, bias)
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut stack = small_stack();
        let dy = Tensor::filled(vec![1, 3], 1.0f64);
        assert!(stack.backward(&dy).is_err());
    }

    #[test]
    fn arch_string_round_trips() {
        let stack = small_stack();
        let arch = stack.arch_string();
        let rebuilt = LayerStack::<f64>::from_arch(&arch).unwrap();
        assert_eq!(rebuilt.arch_string(), arch);
        assert_eq!(rebuilt.count_params(), stack.count_params());
    }

    #[test]
    fn empty_stack_has_zero_flops() {
        let stack = LayerStack::<f64>::new(vec![3], vec![]).unwrap();
        assert_eq!(stack.count_flops(), 0);
        assert_eq!(stack.count_params(), 0);
    }

    #[test]
    fn checksum_tracks_parameter_values() {
        let mut stack = small_stack();
        let before = stack.param_checksum();
        assert_eq!(before, small_stack().param_checksum());
        stack.visit_params_mut(&mut |_, _, t| t.values_mut()[0] += 1.0);
        assert_ne!(before, stack.param_checksum());
    }
}
