//! Closed-form privacy curve of the plain Gaussian mechanism.

use crate::error::{invalid, Result};
use crate::special::norm_cdf;

/// `delta(eps) = Phi(s/(2 sigma) - eps sigma/s) - e^eps Phi(-s/(2 sigma) - eps sigma/s)`
/// for sensitivity `s`.
pub fn gaussian_delta(sensitivity: f64, sigma: f64, epsilon: f64) -> f64 {
    if sensitivity <= 0.0 {
        return 0.0;
    }
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    let tail = libm::exp(epsilon + libm::log(norm_cdf(-a - b)));
    (norm_cdf(a - b) - tail).max(0.0)
}

/// Smallest `eps >= 0` with `gaussian_delta(eps) <= delta`, by bisection.
pub fn gaussian_epsilon(sensitivity: f64, sigma: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    if sigma.is_nan() || sigma <= 0.0 || sensitivity < 0.0 {
        return invalid("sigma must be positive and sensitivity non-negative");
    }
    if gaussian_delta(sensitivity, sigma, 0.0) <= delta {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while gaussian_delta(sensitivity, sigma, hi) > delta {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return invalid("epsilon out of range");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gaussian_delta(sensitivity, sigma, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_value() {
        // 2 Phi(0.5) - 1
        let d = gaussian_delta(1.0, 1.0, 0.0);
        assert!((d - 0.382_924_922_548_026).abs() < 1e-12);
    }

    #[test]
    fn inversion_round_trip() {
        for &(s, sigma, eps) in &[(1.0, 1.0, 1.0), (2.0_f64.sqrt(), 3.0, 0.3), (1.0, 0.5, 5.0)] {
            let d = gaussian_delta(s, sigma, eps);
            let e = gaussian_epsilon(s, sigma, d).unwrap();
            assert!((e - eps).abs() < 1e-9, "{e} vs {eps}");
        }
    }

    #[test]
    fn scale_invariance() {
        let a = gaussian_epsilon(1.0, 2.0, 1e-6).unwrap();
        let b = gaussian_epsilon(3.0, 6.0, 1e-6).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
