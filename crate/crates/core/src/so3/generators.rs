use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

const IMAG_TOL: f64 = 1e-10;

/// Anti-Hermitian SU(2) generators `(J_x, J_y, J_z)` in the `|l, m>` basis
/// (ascending `m`), satisfying `[J_x, J_y] = J_z` cyclically.
///
/// `J_z = diag(i m)`; the ladder operators carry the Condon-Shortley phase
/// (all raising elements positive).
pub fn su2_generators(l: u32) -> [DMatrix<Complex64>; 3] {
    let n = (2 * l + 1) as usize;
    let lf = l as f64;
    let mut raise = DMatrix::<f64>::zeros(n, n);
    for col in 0..n - 1 {
        let m = col as f64 - lf;
        raise[(col + 1, col)] = (lf * (lf + 1.0) - m * (m + 1.0)).sqrt();
    }
    let lower = raise.transpose();
    let i = Complex64::i();
    // i * (J+ + J-)/2
    let jx = (&raise + &lower).map(|v| i * (0.5 * v));
    // -i * (J+ - J-)/(2i) = (J- - J+)/2
    let jy = (&lower - &raise).map(|v| Complex64::new(0.5 * v, 0.0));
    let jz = DMatrix::from_fn(n, n, |r, c| if r == c { i * (r as f64 - lf) } else { Complex64::new(0.0, 0.0) });
    [jx, jy, jz]
}

/// Unitary change of basis taking complex harmonics (ascending `m`) to the
/// real harmonics used in this crate: `y_real = C y_complex`.
pub fn complex_to_real(l: u32) -> DMatrix<Complex64> {
    let n = (2 * l + 1) as usize;
    let li = l as i64;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    let idx = |m: i64| (m + li) as usize;
    c[(idx(0), idx(0))] = Complex64::new(1.0, 0.0);
    for m in 1..=li {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        c[(idx(m), idx(m))] = Complex64::new(s, 0.0);
        c[(idx(m), idx(-m))] = Complex64::new(sign * s, 0.0);
        c[(idx(-m), idx(m))] = Complex64::new(0.0, -s);
        c[(idx(-m), idx(-m))] = Complex64::new(0.0, sign * s);
    }
    c
}

/// Real SO(3) generators `(G_x, G_y, G_z)` acting on real harmonics of degree
/// `l`: `C J C^dagger` with the imaginary residue checked and dropped.
pub fn so3_generators(l: u32) -> Result<[DMatrix<f64>; 3]> {
    let c = complex_to_real(l);
    let cd = c.adjoint();
    let mut out: [DMatrix<f64>; 3] = Default::default();
    for (k, j) in su2_generators(l).iter().enumerate() {
        let g = &c * j * &cd;
        let residue = g.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
        if residue > IMAG_TOL {
            return Err(Error::ImaginaryResidue(residue));
        }
        out[k] = g.map(|v| v.re);
    }
    Ok(out)
}
