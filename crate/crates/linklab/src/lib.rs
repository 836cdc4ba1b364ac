//! Link-level simulation lab.
//!
//! Everything needed to train a small (7,4) autoencoder transceiver, run it
//! over AWGN / fast-Rayleigh / high-speed-railway Rician channels, attack it
//! with a WGAN-trained input-agnostic perturbation generator, and benchmark
//! the lot against classical BPSK/Hamming baselines — all deterministic under
//! a master seed.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below pin `f64` for the shipped tools.

pub mod advgan;
pub mod attacks;
pub mod autoenc;
pub mod bler;
pub mod channel;
pub mod checkpoint;
pub mod classical;
pub mod error;
pub mod harness;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the shipped binaries and experiment harness.
pub type Real = f64;

/// Tensor over the shipped scalar type.
pub type TensorF64 = tensor::Tensor<Real>;
/// Layer stack over the shipped scalar type.
pub type LayerStackF64 = nn::LayerStack<Real>;
/// Optimizer over the shipped scalar type.
pub type OptimizerF64 = optim::Optimizer<Real>;
