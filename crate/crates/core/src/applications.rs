//! Accounting for mechanisms whose sensitivity is a binomial count.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::mmcc::AdjacencyMode;
use crate::mog::{mog_from_binomial, mog_from_hypergeometric, pld_from_mog, MixtureGaussian};
use crate::pld::DiscretizationConfig;

/// Epsilon of the `rounds`-fold self-composition of a MoG mechanism,
/// maximized over the orientations in `adjacency`.
pub fn mixture_epsilon(
    mog: &MixtureGaussian,
    rounds: u64,
    delta: f64,
    cfg: &DiscretizationConfig,
    adjacency: AdjacencyMode,
) -> Result<f64> {
    if rounds == 0 {
        return invalid("round count must be at least 1");
    }
    let mut eps: f64 = 0.0;
    for &adj in adjacency.orientations() {
        let pld = pld_from_mog(mog, cfg, adj)?;
        let composed = if rounds == 1 {
            pld
        } else {
            crate::pld::compose_all_truncated(&[(pld, rounds)], cfg.tail_truncation_mass)?
        };
        eps = eps.max(composed.epsilon_for_delta(delta)?);
    }
    Ok(eps)
}

fn max_epsilon(mog: &MixtureGaussian, rounds: u64, delta: f64, cfg: &DiscretizationConfig) -> Result<f64> {
    mixture_epsilon(mog, rounds, delta, cfg, AdjacencyMode::Both)
}

fn check(n: u64, p: f64, sigma: f64, delta: f64) -> Result<()> {
    if n == 0 {
        return invalid("round count must be at least 1");
    }
    if !(0.0..=1.0).contains(&p) {
        return invalid("p must lie in [0, 1]");
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return invalid("sigma must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    Ok(())
}

/// Releasing only the last iterate of `n` noisy linear-loss gradient steps
/// is one Gaussian mechanism with sensitivity `Binomial(n, p)` and
/// standard deviation `sigma sqrt(n)`.
pub fn last_iterate_linear_epsilon(n: u64, p: f64, sigma: f64, delta: f64, cfg: &DiscretizationConfig) -> Result<f64> {
    check(n, p, sigma, delta)?;
    let mog = mog_from_binomial(n, p, 1.0, sigma * libm::sqrt(n as f64))?;
    max_epsilon(&mog, 1, delta, cfg)
}

/// `n`-round DP-SGD: self-composition of the subsampled Gaussian.
pub fn dpsgd_epsilon(n: u64, p: f64, sigma: f64, delta: f64, cfg: &DiscretizationConfig) -> Result<f64> {
    check(n, p, sigma, delta)?;
    max_epsilon(&MixtureGaussian::subsampled_gaussian(p, 1.0, sigma)?, n, delta, cfg)
}

/// Group privacy for `k` examples under Poisson sampling: each round is a
/// Gaussian mechanism with sensitivity `Binomial(k, p)`.
pub fn group_privacy_dpsgd_epsilon(
    group_size: u64,
    p: f64,
    sigma: f64,
    rounds: u64,
    delta: f64,
    cfg: &DiscretizationConfig,
) -> Result<f64> {
    check(rounds, p, sigma, delta)?;
    if group_size == 0 {
        return invalid("group size must be at least 1");
    }
    max_epsilon(&mog_from_binomial(group_size, p, 1.0, sigma)?, rounds, delta, cfg)
}

/// Group privacy with fixed-size batches of `batch` out of `population`
/// records: the group's count in a batch is hypergeometric.
pub fn group_privacy_fixed_batch_epsilon(
    group_size: u64,
    population: u64,
    batch: u64,
    sigma: f64,
    rounds: u64,
    delta: f64,
    cfg: &DiscretizationConfig,
) -> Result<f64> {
    if population == 0 {
        return invalid("population must be positive");
    }
    check(rounds, batch as f64 / population as f64, sigma, delta)?;
    max_epsilon(
        &mog_from_hypergeometric(population, group_size, batch, 1.0, sigma)?,
        rounds,
        delta,
        cfg,
    )
}

/// Black-box group conversion of an `(eps, delta)` guarantee to groups of
/// size `k`: `(k eps, k e^((k - 1) eps) delta)`.
pub fn black_box_group(epsilon: f64, delta: f64, k: u64) -> (f64, f64) {
    let kf = k as f64;
    (kf * epsilon, kf * libm::exp((kf - 1.0) * epsilon) * delta)
}

/// Epsilons of [`group_privacy_dpsgd_epsilon`] for `k = 1..=max_group`.
pub fn group_privacy_curve(
    max_group: u64,
    p: f64,
    sigma: f64,
    rounds: u64,
    delta: f64,
    cfg: &DiscretizationConfig,
) -> Result<Vec<f64>> {
    (1..=max_group)
        .map(|k| group_privacy_dpsgd_epsilon(k, p, sigma, rounds, delta, cfg))
        .collect()
}
