//! Digital-analog quantum convolutional neural networks.
//!
//! The pipeline has three stages:
//!
//! 1. [`simulator`]: exact state-vector simulation of an angle-encoded pixel
//!    patch evolving under a trotterised Rydberg-Ising Hamiltonian.
//! 2. [`kernel`] and [`quanvolve`]: non-trainable quantum kernels swept over
//!    images to produce multi-channel feature maps.
//! 3. [`cnn`] and [`evalio`]: a small convolutional head trained on those
//!    maps, and the metrics and dataset readers around it.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root pin the double-precision variants used by default.

pub mod cnn;
pub mod evalio;
pub mod kernel;
pub mod quanvolve;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub use scalar::Real;

pub type Statevector = simulator::Statevector<f64>;
pub type Couplings = simulator::Couplings<f64>;
pub type Kernel = kernel::Kernel<f64>;
pub type Quanvolver = quanvolve::Quanvolver<f64>;
pub type LabeledScores = evalio::LabeledScores<f64>;
pub type Model = cnn::ModelParams<f64>;
