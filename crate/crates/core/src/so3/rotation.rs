use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type Rot3 = Matrix3<f64>;

/// ZYZ Euler angles: `R = Rz(alpha) Ry(beta) Rz(gamma)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn rz(t: f64) -> Rot3 {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn ry(t: f64) -> Rot3 {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        EulerAngles { alpha, beta, gamma }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn to_matrix(&self) -> Rot3 {
        rz(self.alpha) * ry(self.beta) * rz(self.gamma)
    }

    /// Inverse of [`EulerAngles::to_matrix`] for a proper rotation. At the
    /// gimbal poles (`sin beta = 0`) the whole in-plane angle goes to `alpha`.
    pub fn from_matrix(r: &Rot3) -> Self {
        let cb = r[(2, 2)].clamp(-1.0, 1.0);
        let sb = (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
        if sb > 1e-9 {
            EulerAngles {
                alpha: r[(1, 2)].atan2(r[(0, 2)]),
                beta: sb.atan2(cb),
                gamma: r[(2, 1)].atan2(-r[(2, 0)]),
            }
        } else if cb > 0.0 {
            EulerAngles { alpha: r[(1, 0)].atan2(r[(0, 0)]), beta: 0.0, gamma: 0.0 }
        } else {
            // R = Rz(a) Ry(pi) with Ry(pi) = diag(-1, 1, -1)
            EulerAngles { alpha: (-r[(0, 1)]).atan2(r[(1, 1)]), beta: std::f64::consts::PI, gamma: 0.0 }
        }
    }
}

/// Haar-random rotation from a normalised Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rot3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        let [w, x, y, z] = q.map(|v| v / n);
        return Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
    }
}

pub fn rotate(r: &Rot3, v: [f64; 3]) -> [f64; 3] {
    let out = r * Vector3::new(v[0], v[1], v[2]);
    [out[0], out[1], out[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_angles() {
        assert_eq!(EulerAngles::identity().to_matrix(), Rot3::identity());
    }

    #[test]
    fn rotation_matrix_is_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let e = EulerAngles::new(rng.random_range(-3.0..3.0), rng.random_range(0.0..3.1), rng.random_range(-3.0..3.0));
            let r = e.to_matrix();
            assert!((r * r.transpose() - Rot3::identity()).abs().max() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let back = EulerAngles::from_matrix(&r).to_matrix();
            assert!((back - r).abs().max() < 1e-10);
        }
        for r in [Rot3::identity(), rz(0.7), rz(0.3) * ry(std::f64::consts::PI) * rz(-1.2)] {
            let back = EulerAngles::from_matrix(&r).to_matrix();
            assert!((back - r).abs().max() < 1e-10);
        }
    }
}
