//! Scalar linear-Gaussian state estimation.
//!
//! The estimator conditions the state of a one-dimensional linear chain
//!
//! ```text
//! ω_0 ~ N(μ_0, σ_0²)
//! ω_t = a_t ω_{t-1} + b_t + r_t ε_t          (t = 1..n)
//! x_t = c_t ω_t + d_t + q_t η_t               (t = 0..n, optional per step)
//! ```
//!
//! on a full observation record by combining a forward pass of normalized
//! moment-form Gaussians with a backward pass of unnormalized root-form
//! messages `exp[-½(uω - v)²]`. The same answer is computed independently by
//! brute-force quadrature in [`oracle`], which the test suites use as ground
//! truth.
//!
//! Modules:
//! - [`gaussian`]: closed-form affine-noise convolution and Gaussian products.
//! - [`model`]: the state-space model, its file formats and a trajectory sampler.
//! - [`estimator`]: forward/backward passes, smoothing, filtering and prediction.
//! - [`oracle`]: discretized densities, Bayes conditioning and kernel propagation.
//! - [`bertrand`]: the two chord parameterizations of Bertrand's problem.
//!
//! The kernels, model and estimator are generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below name the `f64` instantiations used by the file formats,
//! the oracle and the command-line tool.

pub mod bertrand;
pub mod estimator;
pub mod gaussian;
pub mod model;
pub mod oracle;
mod scalar;

pub use scalar::Scalar;

pub type MomentGaussian64 = gaussian::MomentGaussian<f64>;
pub type MomentGaussian32 = gaussian::MomentGaussian<f32>;
pub type RootMessage64 = gaussian::RootMessage<f64>;
pub type RootMessage32 = gaussian::RootMessage<f32>;
pub type AffineNoise64 = gaussian::AffineNoise<f64>;
pub type ObsChannel64 = gaussian::ObsChannel<f64>;
pub type StepParams64 = model::StepParams<f64>;
pub type ModelSpec64 = model::ModelSpec<f64>;
pub type ModelSpec32 = model::ModelSpec<f32>;
pub type ObservationSeries64 = model::ObservationSeries<f64>;
pub type EstimateSeries64 = estimator::EstimateSeries<f64>;
