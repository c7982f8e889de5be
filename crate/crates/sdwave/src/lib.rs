//! Numerical study of a semilinear stochastic strongly damped wave
//! equation on the unit interval,
//!
//! ```text
//! u_tt = Laplace(u) + alpha * Laplace(u_t) + F(u) + noise,
//! u(t,0) = u(t,1) = 0,
//! ```
//!
//! discretized by piecewise-linear finite elements in space and a linear
//! implicit Euler step in time, with the noise expanded in the Dirichlet
//! sine basis.  The crate provides the discrete operators ([`fem`],
//! [`linalg`]), the noise sampler ([`noise`]), the time steppers and the
//! exact linear reference solution ([`scheme`]), Monte-Carlo convergence
//! and regularity studies ([`experiment`]), and the config-file front end
//! used by the `sdwave` binary ([`config`], [`runner`]).

pub mod config;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod linalg;
pub mod noise;
pub mod rng;
pub mod runner;
pub mod scheme;

pub use error::{Error, Result};
