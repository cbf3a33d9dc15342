/// Double factorial `k!! = k (k-2) (k-4) ...`, with `0!! = 1!! = 1`.
pub fn semifactorial(k: u32) -> f64 {
    (1..=k).rev().step_by(2).fold(1.0, |acc, v| acc * v as f64)
}

/// Rising factorial `x (x+1) ... (x+k-1)`; `1` for `k = 0`.
pub fn pochhammer(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (x + i as f64))
}

pub fn factorial(n: u32) -> f64 {
    pochhammer(1.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semifactorial_values() {
        assert_eq!(semifactorial(0), 1.0);
        assert_eq!(semifactorial(1), 1.0);
        assert_eq!(semifactorial(5), 15.0);
        assert_eq!(semifactorial(7), 105.0);
        assert_eq!(semifactorial(8), 384.0);
        // exact in f64 up to 20
        assert_eq!(semifactorial(20), 3_715_891_200.0);
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(3.0, 0), 1.0);
        assert_eq!(pochhammer(3.0, 2), 12.0);
        assert_eq!(pochhammer(2.0, 3), 24.0);
        assert_eq!(factorial(5), 120.0);
    }

    #[test]
    fn pochhammer_is_factorial_ratio() {
        // (l-m+1)_(2m) = (l+m)!/(l-m)!
        for l in 0..8u32 {
            for m in 0..=l {
                let lhs = pochhammer((l - m + 1) as f64, 2 * m);
                let rhs = factorial(l + m) / factorial(l - m);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }
}
