use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::combinatorics::pochhammer;
use super::legendre::legendre_column;
use crate::{Error, Result};

/// Spherical coordinates `(r, theta, phi)` with `theta` measured from +z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalCoord {
    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * st * cp, self.r * st * sp, self.r * ct]
    }
}

/// Cartesian to spherical. The origin maps to `(0, 0, 0)`.
pub fn get_spherical_from_cartesian(v: [f64; 3]) -> SphericalCoord {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return SphericalCoord { r: 0.0, theta: 0.0, phi: 0.0 };
    }
    let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = v[1].atan2(v[0]);
    // atan2 returns -pi for (-x, -0.0); keep phi in (-pi, pi].
    if phi <= -PI {
        phi = PI;
    }
    SphericalCoord { r, theta, phi }
}

/// Normalisation constants for real harmonics up to a maximum degree.
///
/// Entry `(l, m)` lives at `l^2 + l + m`. For `m != 0` the constant carries
/// the `sqrt(2)` that makes each degree an orthonormal set on the sphere.
#[derive(Clone, Debug)]
pub struct HarmonicIndexTable {
    max_degree: u32,
    norms: Vec<f64>,
}

impl HarmonicIndexTable {
    pub fn new(max_degree: u32) -> Self {
        let mut norms = Vec::with_capacity(((max_degree + 1) * (max_degree + 1)) as usize);
        for l in 0..=max_degree {
            let base = (2 * l + 1) as f64 / (4.0 * PI);
            for m in -(l as i32)..=(l as i32) {
                let am = m.unsigned_abs();
                let n = (base / pochhammer((l - am + 1) as f64, 2 * am)).sqrt();
                norms.push(if m == 0 { n } else { n * std::f64::consts::SQRT_2 });
            }
        }
        HarmonicIndexTable { max_degree, norms }
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn index(l: u32, m: i32) -> usize {
        ((l * l + l) as i64 + m as i64) as usize
    }

    pub fn norm(&self, l: u32, m: i32) -> Result<f64> {
        if l > self.max_degree {
            return Err(Error::DegreeOutOfRange { requested: l, max: self.max_degree });
        }
        if m.unsigned_abs() > l {
            return Err(Error::InvalidIndex(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(self.norms[Self::index(l, m)])
    }

    /// All degrees `0..=lmax` at one direction, concatenated (`(lmax+1)^2` values).
    pub fn eval_all(&self, lmax: u32, coord: &SphericalCoord) -> Result<Vec<f64>> {
        if lmax > self.max_degree {
            return Err(Error::DegreeOutOfRange { requested: lmax, max: self.max_degree });
        }
        let x = coord.theta.cos();
        let columns: Vec<Vec<f64>> = (0..=lmax).map(|m| legendre_column(lmax, m, x)).collect();
        let mut out = Vec::with_capacity(((lmax + 1) * (lmax + 1)) as usize);
        for l in 0..=lmax {
            for m in -(l as i32)..=(l as i32) {
                let am = m.unsigned_abs();
                let p = columns[am as usize][(l - am) as usize];
                let angular = match m.cmp(&0) {
                    std::cmp::Ordering::Less => (am as f64 * coord.phi).sin(),
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Greater => (am as f64 * coord.phi).cos(),
                };
                out.push(self.norms[Self::index(l, m)] * p * angular);
            }
        }
        Ok(out)
    }
}

/// Real spherical harmonics of degree `l` for each coordinate, ordered by
/// ascending `m`. The radius is ignored.
pub fn real_spherical_harmonics(
    table: &HarmonicIndexTable,
    l: u32,
    coords: &[SphericalCoord],
) -> Result<Vec<Vec<f64>>> {
    if l > table.max_degree {
        return Err(Error::DegreeOutOfRange { requested: l, max: table.max_degree });
    }
    coords
        .iter()
        .map(|c| {
            let all = table.eval_all(l, c)?;
            Ok(all[(l * l) as usize..].to_vec())
        })
        .collect()
}

/// Convenience: degree-`l` harmonics of a Cartesian direction.
pub fn spherical_harmonics_xyz(table: &HarmonicIndexTable, l: u32, v: [f64; 3]) -> Result<Vec<f64>> {
    let c = get_spherical_from_cartesian(v);
    Ok(real_spherical_harmonics(table, l, &[c])?.remove(0))
}
