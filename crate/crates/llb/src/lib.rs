//! Numerical laboratory for a stochastic Landau-Lifshitz-Bloch equation
//! driven by a truncated basis of spatially smooth Wiener modes.
//!
//! The state is a three-component vector field `u` on a centred cube
//! `[-n, n]^d` (d = 1 or 2) with Dirichlet zero boundary. The dynamics
//! integrated by [`integrator`] is, in Ito form,
//!
//! ```text
//! du = [ Du + u x Du - (1 + |u|^2) u + (eps^2/2) sum_k (u x f_k) x f_k ] dt
//!      + eps sum_k (u x f_k + f_k) dW_k
//! ```
//!
//! where `D` is the Laplacian, `x` the cross product in R^3, `f_k` a fixed
//! family of smooth modes with summable `W^{1,inf} + H^1` norms and `W_k`
//! independent scalar Wiener processes. `eps` in `[0, 1]` scales the noise.
//!
//! The crate provides the spatial toolkit (grids, cut-off profiles,
//! difference operators, quadrature norms), the noise model, serial and
//! ensemble integrators, a domain-expansion harness that compares runs on
//! growing cubes, occupation-measure statistics, and a linear
//! Ornstein-Uhlenbeck oracle used to validate the stochastic machinery
//! against closed-form stationary variances.

pub mod config;
pub mod cutoff;
pub mod error;
pub mod expansion;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod measure;
pub mod noise;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod vec3;

pub use error::LlbError;
