//! Reference implementations used by the test suites.
//!
//! Nothing here calls the accounting engine. Only the plain data types
//! of `mmacc-core` are shared, so every value is computed independently:
//! hockey-stick divergences by adaptive quadrature and by Monte Carlo,
//! product mixtures by subset enumeration, and tail quantiles by
//! enumerating participation vectors.

mod quadrature;

use std::fmt;

use mmacc_core::{EncoderMatrix, MixtureGaussian, ProductMixture};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

pub use quadrature::integrate;

const MAX_COLUMNS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge { size: usize, limit: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge { size, limit } => {
                write!(f, "instance of size {size} exceeds the enumeration limit {limit}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `ln P(x) - ln Q(x)` for `P = sum_i p_i N(-c_i, s^2)` and `Q = N(0, s^2)`.
fn log_ratio(mog: &MixtureGaussian, x: f64) -> f64 {
    let s2 = mog.sigma() * mog.sigma();
    let terms: Vec<f64> = mog
        .probabilities()
        .iter()
        .zip(mog.sensitivities())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, c)| p.ln() + (-2.0 * c * x - c * c) / (2.0 * s2))
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn mixture_density(mog: &MixtureGaussian, x: f64) -> f64 {
    let s = mog.sigma();
    mog.probabilities()
        .iter()
        .zip(mog.sensitivities())
        .map(|(p, c)| p * gauss_density((x + c) / s) / s)
        .sum()
}

fn gauss_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Root of the decreasing function `f` on `[lo, hi]` by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `H_eps(P || Q)` with `P` the mixture of `N(-c_i, sigma^2)` and `Q` the
/// centred Gaussian (remove orientation), by adaptive Gauss-Kronrod
/// quadrature of `max(P - e^eps Q, 0)` split at the kink.
pub fn hockey_stick_numeric(mog: &MixtureGaussian, epsilon: f64) -> f64 {
    hockey_stick_oriented(mog, epsilon, false)
}

/// `H_eps(Q || P)`, the add orientation.
pub fn hockey_stick_numeric_add(mog: &MixtureGaussian, epsilon: f64) -> f64 {
    hockey_stick_oriented(mog, epsilon, true)
}

fn hockey_stick_oriented(mog: &MixtureGaussian, epsilon: f64, add: bool) -> f64 {
    let s = mog.sigma();
    let c_max = mog.sensitivities().iter().cloned().fold(0.0, f64::max);
    if c_max == 0.0 {
        return 0.0;
    }
    let (lo, hi) = (-c_max - 12.0 * s, c_max + 12.0 * s);
    let e = epsilon.exp();
    let q = |x: f64| gauss_density(x / s) / s;
    let p = |x: f64| mixture_density(mog, x);
    let tol = 1e-12;
    if add {
        // Q > e^eps P where -log_ratio > eps.
        let g = |x: f64| -log_ratio(mog, x) - epsilon;
        let kink = if g(lo) >= 0.0 {
            lo
        } else if g(hi) <= 0.0 {
            return 0.0;
        } else {
            bisect(|x| -g(x), lo, hi)
        };
        integrate(|x| (q(x) - e * p(x)).max(0.0), kink, hi, tol)
    } else {
        let g = |x: f64| log_ratio(mog, x) - epsilon;
        let kink = if g(hi) >= 0.0 {
            hi
        } else if g(lo) <= 0.0 {
            return 0.0;
        } else {
            bisect(g, lo, hi)
        };
        integrate(|x| (p(x) - e * q(x)).max(0.0), lo, kink, tol)
    }
}

/// Monte Carlo estimate of `H_eps(P || Q)` (remove orientation) as
/// `E_P[max(1 - e^(eps - L), 0)]`. Returns `(mean, standard error)`.
pub fn hockey_stick_monte_carlo(mog: &MixtureGaussian, epsilon: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cumulative: Vec<f64> = mog
        .probabilities()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("non-empty mixture");
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let u: f64 = rand::Rng::random::<f64>(&mut rng) * total;
        let i = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = -mog.sensitivities()[i] + mog.sigma() * z;
        let v = (1.0 - (epsilon - log_ratio(mog, x)).exp()).max(0.0);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Closed-form divergence of the plain Gaussian mechanism.
pub fn gaussian_delta(sensitivity: f64, sigma: f64, epsilon: f64) -> f64 {
    let n = std_normal();
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    n.cdf(a - b) - epsilon.exp() * n.cdf(-a - b)
}

/// Exact distribution of `sum_{j in S} c_j` over random subsets `S`,
/// merging equal sums.
pub fn brute_force_pmog(pm: &ProductMixture) -> Result<MixtureGaussian, OracleError> {
    let k = pm.len();
    if k > MAX_COLUMNS {
        return Err(OracleError::TooLarge { size: k, limit: MAX_COLUMNS });
    }
    let mut atoms: Vec<(f64, f64)> = (0u32..1 << k)
        .map(|mask| {
            let mut prob = 1.0;
            let mut sens = 0.0;
            for j in 0..k {
                if mask >> j & 1 == 1 {
                    prob *= pm.probabilities()[j];
                    sens += pm.sensitivities()[j];
                } else {
                    prob *= 1.0 - pm.probabilities()[j];
                }
            }
            (sens, prob)
        })
        .filter(|a| a.1 > 0.0)
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, p) in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == s => last.1 += p,
            _ => merged.push((s, p)),
        }
    }
    let (sens, probs) = merged.into_iter().unzip();
    Ok(MixtureGaussian::new(probs, sens, pm.sigma()).expect("enumeration yields a distribution"))
}

/// Smallest `s >= 0` with `Pr[sum_j' x_j' <C[0..i, j], C[0..i, j']> > s] <= budget`
/// for independent `x_j' ~ Bernoulli(p)`, by enumerating every
/// participation vector over the columns that overlap column `j`.
pub fn exact_min_s(c: &EncoderMatrix, i: usize, j: usize, p: f64, budget: f64) -> Result<f64, OracleError> {
    if budget >= 1.0 {
        return Ok(0.0);
    }
    let dots: Vec<f64> = (0..c.cols())
        .map(|k| (0..i).map(|r| c.get(r, j) * c.get(r, k)).sum::<f64>())
        .filter(|&d| d > 0.0)
        .collect();
    let k = dots.len();
    if k > MAX_COLUMNS {
        return Err(OracleError::TooLarge { size: k, limit: MAX_COLUMNS });
    }
    let mut outcomes: Vec<(f64, f64)> = (0u32..1 << k)
        .map(|mask| {
            let ones = mask.count_ones() as i32;
            let prob = p.powi(ones) * (1.0 - p).powi(k as i32 - ones);
            let value = (0..k).filter(|&b| mask >> b & 1 == 1).map(|b| dots[b]).sum::<f64>();
            (value, prob)
        })
        .collect();
    outcomes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Walk down from the largest value; `above` is Pr[X > current value].
    let mut above = 0.0;
    let mut best = outcomes[0].0;
    let mut idx = 0;
    while idx < outcomes.len() {
        let v = outcomes[idx].0;
        if above > budget {
            break;
        }
        best = v;
        while idx < outcomes.len() && outcomes[idx].0 == v {
            above += outcomes[idx].1;
            idx += 1;
        }
    }
    Ok(best.max(0.0))
}

/// `Pr[Binomial(n, p) > t]` summed directly.
pub fn binomial_upper_tail(n: u64, p: f64, t: u64) -> f64 {
    ((t + 1)..=n)
        .map(|k| (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp())
        .sum()
}

/// Squared norm of the first column of the prefix-sum square root,
/// `sum_{k<n} (binom(2k, k) / 4^k)^2`, from the central binomial closed form.
pub fn prefix_opt_first_column_norm_sq(n: usize) -> f64 {
    let mut terms: Vec<f64> = (0..n as u64)
        .map(|k| {
            let f = (ln_binomial(2 * k, k) - k as f64 * 4f64.ln()).exp();
            f * f
        })
        .collect();
    // Small terms first.
    terms.reverse();
    terms.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_reference_point() {
        let g = MixtureGaussian::gaussian(1.0, 1.0).unwrap();
        let q = hockey_stick_numeric(&g, 0.0);
        assert!((q - 0.382_924_922_548_026).abs() < 1e-9, "{q}");
        assert!((gaussian_delta(1.0, 1.0, 0.0) - q).abs() < 1e-9);
        assert!((hockey_stick_numeric_add(&g, 0.7) - gaussian_delta(1.0, 1.0, 0.7)).abs() < 1e-9);
    }

    #[test]
    fn zero_sensitivity() {
        let g = MixtureGaussian::gaussian(0.0, 2.0).unwrap();
        assert_eq!(hockey_stick_numeric(&g, 0.0), 0.0);
    }

    #[test]
    fn small_enumerations() {
        let pm = ProductMixture::new(vec![0.5, 0.5], vec![1.0, 1.0], 1.0).unwrap();
        let m = brute_force_pmog(&pm).unwrap();
        assert_eq!(m.sensitivities(), &[0.0, 1.0, 2.0]);
        assert_eq!(m.probabilities(), &[0.25, 0.5, 0.25]);
        let big = ProductMixture::new(vec![0.1; 21], vec![1.0; 21], 1.0).unwrap();
        assert!(brute_force_pmog(&big).is_err());
    }

    #[test]
    fn min_s_two_columns() {
        // Prefix row (1, 2): dots with column 0 are {1, 2}. Outcomes
        // 0, 1, 2, 3 each with probability 1/4.
        let c = EncoderMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(exact_min_s(&c, 1, 0, 0.5, 0.3).unwrap(), 2.0);
        assert_eq!(exact_min_s(&c, 1, 0, 0.5, 0.2).unwrap(), 3.0);
        assert_eq!(exact_min_s(&c, 1, 0, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(exact_min_s(&c, 0, 0, 0.5, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn binomial_tail() {
        assert!((binomial_upper_tail(4, 0.5, 2) - 5.0 / 16.0).abs() < 1e-14);
    }
}
