use nalgebra::DMatrix;

use super::generators::so3_generators;
use super::rotation::{EulerAngles, Rot3};

/// Real irreducible representation matrix `D^l(g)`, `(2l+1) x (2l+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrepMatrix {
    pub degree: u32,
    pub entries: DMatrix<f64>,
}

impl IrrepMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |D D^T - I|`
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim();
        (&self.entries * self.entries.transpose() - DMatrix::identity(n, n)).amax()
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// The argument is scaled until its 1-norm is below 1/2; the series is then
/// summed until terms drop under 1e-17 relative to the partial sum.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|c| a.column(c).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..40 {
        term = &term * &x / k as f64;
        sum += &term;
        if term.amax() <= 1e-17 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `D^l(alpha, beta, gamma) = exp(alpha G_z) exp(beta G_y) exp(gamma G_z)`.
pub fn wigner_d(l: u32, angles: EulerAngles) -> IrrepMatrix {
    let [_, gy, gz] = so3_generators(l).expect("real basis change is exact for integer l");
    let entries = expm(&(&gz * angles.alpha)) * expm(&(&gy * angles.beta)) * expm(&(&gz * angles.gamma));
    IrrepMatrix { degree: l, entries }
}

/// Same as [`wigner_d`]; kept under the name used by the basis solver.
pub fn irr_repr(l: u32, angles: EulerAngles) -> IrrepMatrix {
    wigner_d(l, angles)
}

/// `D^l(R)` for a rotation matrix.
pub fn wigner_d_from_matrix(l: u32, r: &Rot3) -> IrrepMatrix {
    wigner_d(l, EulerAngles::from_matrix(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{random_rotation, rotate, spherical_harmonics_xyz, HarmonicIndexTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expm_of_zero_and_rotation() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z), DMatrix::identity(3, 3));
        let t = 0.9f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((e - want).amax() < 1e-14);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -40.0, 40.0, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[40f64.cos(), -40f64.sin(), 40f64.sin(), 40f64.cos()]);
        assert!((expm(&a) - want).amax() < 1e-12);
    }

    #[test]
    fn identity_and_trivial() {
        for l in 0..=4 {
            let d = wigner_d(l, EulerAngles::identity());
            assert_eq!(d.entries, DMatrix::identity(d.dim(), d.dim()));
        }
        let d = wigner_d(0, EulerAngles::new(0.3, 1.2, -2.0));
        assert!((d.entries[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(irr_repr(2, EulerAngles::new(0.1, 0.2, 0.3)), wigner_d(2, EulerAngles::new(0.1, 0.2, 0.3)));
    }

    #[test]
    fn degree_one_is_permuted_rotation_matrix() {
        // (m=-1, 0, 1) <-> (-y, z, -x)
        let p = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        let e = EulerAngles::new(0.4, 1.3, -0.8);
        let r = e.to_matrix();
        let r = DMatrix::from_fn(3, 3, |i, j| r[(i, j)]);
        let d = wigner_d(1, e).entries;
        assert!((d - &p * r * p.transpose()).amax() < 1e-12);
    }

    #[test]
    fn orthogonal_with_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for l in 0..=4 {
            for _ in 0..20 {
                let r = random_rotation(&mut rng);
                let d = wigner_d_from_matrix(l, &r);
                assert!(d.orthogonality_residual() <= 1e-10);
                assert!((d.entries.clone().determinant() - 1.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn harmonics_rotation_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let table = HarmonicIndexTable::new(4);
        for _ in 0..30 {
            let r = random_rotation(&mut rng);
            let v = rotate(&random_rotation(&mut rng), [0.0, 0.0, 1.0]);
            for l in 0..=4 {
                let lhs = spherical_harmonics_xyz(&table, l, rotate(&r, v)).unwrap();
                let y = spherical_harmonics_xyz(&table, l, v).unwrap();
                let rhs = wigner_d_from_matrix(l, &r).entries * nalgebra::DVector::from_vec(y);
                for i in 0..lhs.len() {
                    assert!((lhs[i] - rhs[i]).abs() <= 1e-8, "l={l}");
                }
            }
        }
    }
}
