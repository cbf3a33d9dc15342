//! Clebsch-Gordan change of basis and the equivariant angular kernel basis.
//!
//! For degrees `k`, `l` and `J` in `|k-l|..=k+l`, `Q_J` is the
//! `(2J+1) x (2k+1)(2l+1)` matrix with orthonormal rows satisfying
//! `Q_J (D^k(g) ⊗ D^l(g)) = D^J(g) Q_J`. It is found as the null space of a
//! Sylvester system sampled at a few fixed rotations.

mod edge_basis;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::so3::{random_rotation, wigner_d, EulerAngles};
use crate::{Error, Result};

pub use edge_basis::{get_equivariant_basis, BasisKey, EdgeBasis};

/// Rotations stacked into the Sylvester system.
const SAMPLED_ROTATIONS: usize = 3;
/// Singular values below this fraction of the largest count as zero.
const NULL_THRESHOLD: f64 = 1e-6;
const BASIS_SEED: u64 = 0x5e3_c6b;

/// A solved change-of-basis block `Q_J` for the pair `(k, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CGMatrix {
    pub j: u32,
    pub k: u32,
    pub l: u32,
    pub entries: DMatrix<f64>,
}

impl CGMatrix {
    /// `max |Q (D^k ⊗ D^l) - D^J Q|` at `g`.
    pub fn intertwiner_residual(&self, g: EulerAngles) -> f64 {
        let lhs = &self.entries * r_tensor(self.k, self.l, g);
        let rhs = wigner_d(self.j, g).entries * &self.entries;
        (lhs - rhs).amax()
    }

    /// `max |Q Q^T - I|`
    pub fn row_orthonormality_residual(&self) -> f64 {
        let n = self.entries.nrows();
        (&self.entries * self.entries.transpose() - DMatrix::identity(n, n)).amax()
    }
}

/// Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

/// Tensor-product representation `D^k(g) ⊗ D^l(g)`.
pub fn r_tensor(k: u32, l: u32, g: EulerAngles) -> DMatrix<f64> {
    kron(&wigner_d(k, g).entries, &wigner_d(l, g).entries)
}

fn check_range(k: u32, l: u32, j: u32) -> Result<()> {
    let (lo, hi) = (k.abs_diff(l), k + l);
    if j < lo || j > hi {
        return Err(Error::CouplingRange { j, lo, hi });
    }
    Ok(())
}

/// Linear operator `S(g)` with `S vec(Q) = vec(Q T - D^J Q)` where
/// `T = D^k ⊗ D^l` and `vec` is row-major:
/// `S = I_{2J+1} ⊗ T^T - D^J ⊗ I_n`.
pub fn sylvester_submatrix(k: u32, l: u32, j: u32, g: EulerAngles) -> Result<DMatrix<f64>> {
    check_range(k, l, j)?;
    let t = r_tensor(k, l, g);
    let d = wigner_d(j, g).entries;
    let n = t.nrows();
    let dj = d.nrows();
    Ok(kron(&DMatrix::identity(dj, dj), &t.transpose()) - kron(&d, &DMatrix::identity(n, n)))
}

fn sampled_rotations(seed: u64) -> Vec<EulerAngles> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SAMPLED_ROTATIONS).map(|_| EulerAngles::from_matrix(&random_rotation(&mut rng))).collect()
}

/// Null space of the stacked Sylvester operators, as columns.
fn null_space(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stacked = DMatrix::<f64>::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        stacked.view_mut((r0, 0), b.shape()).copy_from(b);
        r0 += b.nrows();
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.max();
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= NULL_THRESHOLD * sigma_max)
        .collect();
    DMatrix::from_fn(cols, null.len(), |r, c| v_t[(null[c], r)])
}

fn solve_q_j(j: u32, k: u32, l: u32, seed: u64) -> Result<CGMatrix> {
    let blocks = sampled_rotations(seed)
        .into_iter()
        .map(|g| sylvester_submatrix(k, l, j, g))
        .collect::<Result<Vec<_>>>()?;
    let ns = null_space(&blocks);
    if ns.ncols() != 1 {
        return Err(Error::Nullity { found: ns.ncols(), expected: 1 });
    }
    let n = ((2 * k + 1) * (2 * l + 1)) as usize;
    let dj = (2 * j + 1) as usize;
    let v = ns.column(0);
    // Schur: Q Q^T is a multiple of I, so the unit null vector needs sqrt(2J+1).
    let scale = (dj as f64).sqrt();
    let pivot = v.iter().find(|x| x.abs() > 1e-9).copied().unwrap_or(1.0);
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    let entries = DMatrix::from_fn(dj, n, |r, c| sign * scale * v[r * n + c]);
    Ok(CGMatrix { j, k, l, entries })
}

fn cache() -> &'static Mutex<HashMap<(u32, u32, u32), Arc<CGMatrix>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32, u32), Arc<CGMatrix>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `Q_J` for the tensor product `D^k ⊗ D^l`, cached for the process lifetime.
pub fn basis_transformation_q_j(j: u32, k: u32, l: u32) -> Result<Arc<CGMatrix>> {
    check_range(k, l, j)?;
    let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(q) = guard.get(&(j, k, l)) {
        return Ok(q.clone());
    }
    let q = match solve_q_j(j, k, l, BASIS_SEED) {
        Ok(q) => q,
        Err(Error::Nullity { .. }) => solve_q_j(j, k, l, BASIS_SEED + 1)?,
        Err(e) => return Err(e),
    };
    let q = Arc::new(q);
    guard.insert((j, k, l), q.clone());
    Ok(q)
}

/// All `Q_J` blocks of `(k, l)` stacked in ascending `J`: a square matrix.
pub fn stacked_q(k: u32, l: u32) -> Result<DMatrix<f64>> {
    let n = ((2 * k + 1) * (2 * l + 1)) as usize;
    let mut out = DMatrix::<f64>::zeros(n, n);
    let mut r0 = 0;
    for j in k.abs_diff(l)..=k + l {
        let q = basis_transformation_q_j(j, k, l)?;
        out.view_mut((r0, 0), q.entries.shape()).copy_from(&q.entries);
        r0 += q.entries.nrows();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_angles(seed: u64, n: usize) -> Vec<EulerAngles> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| EulerAngles::from_matrix(&random_rotation(&mut rng))).collect()
    }

    #[test]
    fn kron_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(kron(&i2, &i3), DMatrix::identity(6, 6));
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(kron(&DMatrix::from_element(1, 1, 2.0), &b), &b * 2.0);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[0., 0., 1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0.],
        );
        assert_eq!(kron(&swap, &i2), want);
    }

    #[test]
    fn r_tensor_cases() {
        let g = EulerAngles::new(0.3, 0.9, -1.4);
        assert!((r_tensor(0, 0, g)[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(r_tensor(2, 1, EulerAngles::identity()), DMatrix::identity(15, 15));
        for g in random_angles(1, 5) {
            let t = r_tensor(2, 3, g);
            assert!((&t * t.transpose() - DMatrix::identity(35, 35)).amax() <= 1e-10);
        }
    }

    #[test]
    fn sylvester_trivial_and_range() {
        let s = sylvester_submatrix(0, 0, 0, EulerAngles::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(s.shape(), (1, 1));
        assert!(s[(0, 0)].abs() < 1e-14);
        assert!(matches!(sylvester_submatrix(1, 2, 4, EulerAngles::identity()), Err(Error::CouplingRange { .. })));
        assert!(sylvester_submatrix(1, 3, 1, EulerAngles::identity()).is_err());
    }

    #[test]
    fn nullity_is_one_and_residual_small() {
        for (k, l) in [(1u32, 1u32), (1, 2), (2, 2)] {
            for j in k.abs_diff(l)..=k + l {
                let blocks: Vec<_> =
                    random_angles(7, 2).into_iter().map(|g| sylvester_submatrix(k, l, j, g).unwrap()).collect();
                assert_eq!(null_space(&blocks).ncols(), 1, "k={k} l={l} J={j}");
                let q = basis_transformation_q_j(j, k, l).unwrap();
                let v = DMatrix::from_row_slice(q.entries.len(), 1, q.entries.transpose().as_slice());
                for g in random_angles(8, 3) {
                    let s = sylvester_submatrix(k, l, j, g).unwrap();
                    assert!((s * &v).amax() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn trivial_coupling() {
        let q = basis_transformation_q_j(0, 0, 0).unwrap();
        assert_eq!(q.entries.shape(), (1, 1));
        assert!((q.entries[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(basis_transformation_q_j(3, 1, 1).is_err());
    }

    #[test]
    fn vector_cross_product_coupling() {
        // 1 ⊗ 1 -> 1 is the antisymmetric (cross product) part.
        let q = basis_transformation_q_j(1, 1, 1).unwrap();
        assert_eq!(q.entries.shape(), (3, 9));
        for r in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    let x = q.entries[(r, a * 3 + b)];
                    let y = q.entries[(r, b * 3 + a)];
                    assert!((x + y).abs() < 1e-9);
                }
            }
        }
        for g in random_angles(2, 10) {
            assert!(q.intertwiner_residual(g) <= 1e-8);
        }
        assert!(q.row_orthonormality_residual() <= 1e-10);
    }

    #[test]
    fn completeness_small_degrees() {
        for (k, l) in [(0, 1), (1, 1), (2, 1), (2, 2)] {
            let s = stacked_q(k, l).unwrap();
            let n = s.nrows();
            assert!((&s * s.transpose() - DMatrix::identity(n, n)).amax() <= 1e-8);
        }
    }

    #[test]
    fn deterministic_cache() {
        let a = solve_q_j(2, 2, 1, BASIS_SEED).unwrap();
        let b = solve_q_j(2, 2, 1, BASIS_SEED).unwrap();
        assert_eq!(a, b);
        let c = basis_transformation_q_j(2, 2, 1).unwrap();
        assert_eq!(&a, c.as_ref());
    }
}
