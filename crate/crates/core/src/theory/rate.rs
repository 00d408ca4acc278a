use crate::error::{Error, Result};

/// `ξⁿ / sinh²ξ` for `ξ ≥ 0`, with the exponential form for large `ξ`.
pub fn xi_n_csch2(n: u32, xi: f64) -> f64 {
    let x = xi.abs();
    if x == 0.0 {
        return match n {
            0 => f64::INFINITY,
            1 => f64::INFINITY,
            2 => 1.0,
            _ => 0.0,
        };
    }
    if x > 20.0 {
        let e = (-2.0 * x).exp();
        let log = n as f64 * x.ln() + (4.0 * e / ((1.0 - e) * (1.0 - e))).ln();
        return log.exp();
    }
    x.powi(n as i32) / x.sinh().powi(2)
}

/// Interior maximizer of `ξⁿ csch²ξ`, the root of `n = 2ξ coth ξ`.
///
/// `2ξ coth ξ > 2` for all `ξ > 0`, so `n ≤ 2` has no interior peak.
pub fn rate_peak(n: u32) -> Result<f64> {
    if n <= 2 {
        return Err(Error::Unavailable(format!(
            "ξ^{n} csch²ξ is monotone on (0, ∞)"
        )));
    }
    let n = n as f64;
    let phi = |x: f64| 2.0 * x / x.tanh() - n;
    let (mut lo, mut hi) = (1e-12, n / 2.0 + 1.0);
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_peaks() {
        let p4 = rate_peak(4).unwrap();
        assert!((p4 - 1.915).abs() < 1e-3);
        assert!((4.0 - 2.0 * p4 / p4.tanh()).abs() < 1e-9);
        let p3 = rate_peak(3).unwrap();
        assert!((p3 - 1.288).abs() < 1e-3);
        assert!(rate_peak(2).is_err());
        assert!(rate_peak(0).is_err());
    }

    #[test]
    fn peak_is_a_maximum() {
        for n in 3..12 {
            let p = rate_peak(n).unwrap();
            let f0 = xi_n_csch2(n, p);
            assert!(f0 > xi_n_csch2(n, p * 0.99));
            assert!(f0 > xi_n_csch2(n, p * 1.01));
        }
    }

    #[test]
    fn large_argument_branch_is_continuous() {
        for n in [0, 3, 10] {
            let a = xi_n_csch2(n, 20.0 - 1e-9);
            let b = xi_n_csch2(n, 20.0 + 1e-9);
            assert!((a / b - 1.0).abs() < 1e-7);
        }
        assert!(xi_n_csch2(10, 100.0) > 0.0);
        assert!(xi_n_csch2(10, 1000.0) == 0.0);
    }
}
