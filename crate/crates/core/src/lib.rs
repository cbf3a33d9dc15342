//! SE(3)-equivariant geometric learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`so3`]: Legendre functions, real spherical harmonics, Lie-algebra
//!   generators and Wigner-D matrices.
//! - [`cg`]: Clebsch-Gordan change-of-basis matrices solved numerically from a
//!   Sylvester system, and the per-edge angular kernel basis.
//! - [`graph`]: XYZ parsing, neighbourhood construction, featurisation and the
//!   JSON graph interchange format.
//! - [`tensor`]: a dense tensor type with a reverse-mode tape.
//! - [`layers`]: equivariant convolution, attention, normalisation and pooling.
//! - [`models`]: SE(3)-Transformer and Tensor Field Network, training and
//!   parameter persistence.
//! - [`cli`]: the `se3kit` command line, including the equivariance checker.

pub mod cg;
pub mod cli;
pub mod error;
pub mod graph;
pub mod layers;
pub mod models;
pub mod so3;
pub mod tensor;

pub use error::{Error, Result};
