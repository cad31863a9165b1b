//! Core numerics for nonlocal diffusion `u_t = J*u - u` in a two-dimensional
//! exterior domain: the solution is pinned to zero on a hole containing
//! `B_2(0)` and evolves under convolution with a compactly supported,
//! radially symmetric probability kernel.
//!
//! The crate provides the convolution core (spectral with a direct-summation
//! oracle), positivity-preserving time stepping with an exact whole-space
//! propagator, the logarithmically growing stationary profile and its
//! sub/super-solution barriers, the regular part of the fundamental solution,
//! and the scaled functionals used to measure the long-time behavior.
//!
//! The `parallel` feature (default) runs grid loops on rayon; the sequential
//! fallback is bit-identical because reductions always combine row partials
//! in a fixed order.

pub mod barrier;
pub mod conv;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod fft;
pub mod fundamental;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod stationary;

pub use conv::{convolve, convolve_direct, ConvolutionPlan, Padding};
pub use domain::{build_domain, DomainMask, HoleShape};
pub use error::{Error, Result};
pub use grid::{Field2D, Grid2D};
pub use kernel::{build_kernel, kernel_diffusivity, DiscreteKernel, KernelSpec};
pub use operator::{apply_l, apply_l_analytic, scaled_operator_defect};
