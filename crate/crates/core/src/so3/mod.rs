//! SO(3) primitives.
//!
//! Conventions used throughout the crate:
//!
//! - Polar angle `theta` is measured from +z, azimuth `phi` from +x.
//! - Real harmonics of degree `l` are ordered by ascending `m` and include the
//!   Condon-Shortley phase through the associated Legendre functions.
//! - Rotations act on harmonics as `Y_l(R x) = D^l(R) Y_l(x)`, with
//!   `D^l(R) = exp(alpha G_z) exp(beta G_y) exp(gamma G_z)` for the ZYZ Euler
//!   angles of `R`.
//! - For `l = 1` the real basis `(m = -1, 0, 1)` corresponds to the Cartesian
//!   components `(-y, z, -x)`.

mod combinatorics;
mod generators;
mod harmonics;
mod legendre;
mod rotation;
mod wigner;

pub use combinatorics::{factorial, pochhammer, semifactorial};
pub use generators::{complex_to_real, so3_generators, su2_generators};
pub use harmonics::{
    get_spherical_from_cartesian, real_spherical_harmonics, spherical_harmonics_xyz,
    HarmonicIndexTable, SphericalCoord,
};
pub use legendre::{associated_legendre, legendre_column};
pub use rotation::{random_rotation, rotate, EulerAngles, Rot3};
pub use wigner::{expm, irr_repr, wigner_d, wigner_d_from_matrix, IrrepMatrix};
