use super::combinatorics::{factorial, semifactorial};
use crate::{Error, Result};

/// `P_l^m(x)` for `l = m..=lmax` at a fixed order `m >= 0`.
///
/// Starts from the diagonal `P_m^m = (-1)^m (1-x^2)^(m/2) (2m-1)!!` and runs
/// the three-term recurrence upward in `l`; the `P_{l-2}` term only enters
/// once `l - m > 1`.
pub fn legendre_column(lmax: u32, m: u32, x: f64) -> Vec<f64> {
    if m > lmax {
        return Vec::new();
    }
    let diag = if m == 0 {
        1.0
    } else {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (1.0 - x * x).max(0.0).powf(m as f64 / 2.0) * semifactorial(2 * m - 1)
    };
    let mut out = Vec::with_capacity((lmax - m + 1) as usize);
    out.push(diag);
    for l in (m + 1)..=lmax {
        let lm = (l - m) as f64;
        let mut p = (2 * l - 1) as f64 / lm * x * out[(l - m - 1) as usize];
        if l - m > 1 {
            p -= (l + m - 1) as f64 / lm * out[(l - m - 2) as usize];
        }
        out.push(p);
    }
    out
}

/// Associated Legendre function `P_l^m(x)` with the Condon-Shortley phase.
///
/// Negative orders use `P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m`.
pub fn associated_legendre(l: u32, m: i32, x: f64) -> Result<f64> {
    let am = m.unsigned_abs();
    if am > l {
        return Err(Error::InvalidIndex(format!("|m| = {am} exceeds l = {l}")));
    }
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(Error::InvalidIndex(format!("x = {x} outside [-1, 1]")));
    }
    let x = x.clamp(-1.0, 1.0);
    let p = legendre_column(l, am, x)[(l - am) as usize];
    if m >= 0 {
        Ok(p)
    } else {
        let sign = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * factorial(l - am) / factorial(l + am) * p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed forms written out by hand, independent of the recurrence.
    fn closed_form(l: u32, m: u32, x: f64) -> f64 {
        let s = (1.0 - x * x).sqrt();
        match (l, m) {
            (0, 0) => 1.0,
            (1, 0) => x,
            (1, 1) => -s,
            (2, 0) => 0.5 * (3.0 * x * x - 1.0),
            (2, 1) => -3.0 * x * s,
            (2, 2) => 3.0 * (1.0 - x * x),
            (3, 0) => 0.5 * (5.0 * x.powi(3) - 3.0 * x),
            (3, 1) => -1.5 * (5.0 * x * x - 1.0) * s,
            (3, 2) => 15.0 * x * (1.0 - x * x),
            (3, 3) => -15.0 * s.powi(3),
            _ => unreachable!(),
        }
    }

    #[test]
    fn spec_examples() {
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(associated_legendre(0, 0, x).unwrap(), 1.0);
        }
        assert_eq!(associated_legendre(1, 1, 0.0).unwrap(), -1.0);
        assert!((associated_legendre(2, 0, 0.5).unwrap() + 0.125).abs() < 1e-15);
    }

    #[test]
    fn matches_closed_forms_up_to_l3() {
        for l in 0..=3 {
            for m in 0..=l {
                for i in 0..=40 {
                    let x = -1.0 + i as f64 * 0.05;
                    let got = associated_legendre(l, m as i32, x).unwrap();
                    let want = closed_form(l, m, x);
                    assert!((got - want).abs() <= 1e-12, "l={l} m={m} x={x}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn negative_order_relation() {
        let x = 0.37;
        // P_2^{-1} = -(1/6) P_2^1
        let p = associated_legendre(2, -1, x).unwrap();
        assert!((p - (-1.0 / 6.0) * closed_form(2, 1, x)).abs() < 1e-14);
        let p = associated_legendre(3, -2, x).unwrap();
        assert!((p - (1.0 / 120.0) * closed_form(3, 2, x)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(associated_legendre(1, 2, 0.0).is_err());
        assert!(associated_legendre(2, -3, 0.0).is_err());
        assert!(associated_legendre(2, 0, 1.5).is_err());
    }
}
