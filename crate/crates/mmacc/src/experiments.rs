//! Parameter sweeps over the standard encoder matrices.
//!
//! Grid points run in parallel on the rayon pool; results come back in
//! grid order.

use rayon::prelude::*;

use mmacc_core::analytic::gaussian_epsilon;
use mmacc_core::mmcc::{generalized_mmcc_all_groups, mmcc, AccountingParams, AdjacencyMode};
use mmacc_core::{matrices, DiscretizationConfig, EncoderMatrix, Result};

use crate::report::{AmplificationRow, RestartRow};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub delta: f64,
    pub adjacency: AdjacencyMode,
    pub discretization: DiscretizationConfig,
}

impl SweepConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            adjacency: AdjacencyMode::Both,
            discretization: DiscretizationConfig::default(),
        }
    }

    fn params(&self, p: f64, sigma: f64) -> AccountingParams {
        let mut params = AccountingParams::new(p, sigma, self.delta / 2.0, self.delta / 2.0);
        params.adjacency = self.adjacency;
        params.discretization = self.discretization;
        params
    }
}

fn amplification_row(c: f64, n: usize, matrix: &EncoderMatrix, sensitivity: f64, cfg: &SweepConfig) -> Result<AmplificationRow> {
    let sigma = c * sensitivity;
    let eps_unamplified = gaussian_epsilon(sensitivity, sigma, cfg.delta)?;
    let eps_amplified = mmcc(matrix, &cfg.params(1.0 / n as f64, sigma))?.epsilon;
    Ok(AmplificationRow {
        c,
        n,
        sigma,
        eps_unamplified,
        eps_amplified,
        ratio: eps_unamplified / eps_amplified,
    })
}

fn grid(c_list: &[f64], log_n_max: u32) -> Vec<(f64, usize)> {
    c_list
        .iter()
        .flat_map(|&c| (1..=log_n_max).map(move |i| (c, 1usize << i)))
        .collect()
}

/// Binary-tree mechanism with `sigma = c sqrt(log2 n + 1)` and `p = 1/n`,
/// against the unamplified single-participation Gaussian.
pub fn tree_sweep(c_list: &[f64], log_n_max: u32, cfg: &SweepConfig) -> Result<Vec<AmplificationRow>> {
    grid(c_list, log_n_max)
        .into_par_iter()
        .map(|(c, n)| {
            let matrix = matrices::binary_tree(n)?;
            let sensitivity = ((n as f64).log2() + 1.0).sqrt();
            amplification_row(c, n, &matrix, sensitivity, cfg)
        })
        .collect()
}

/// Prefix-sum square-root factorization with `sigma = c ||C e_1||`.
pub fn prefix_opt_sweep(c_list: &[f64], log_n_max: u32, cfg: &SweepConfig) -> Result<Vec<AmplificationRow>> {
    grid(c_list, log_n_max)
        .into_par_iter()
        .map(|(c, n)| {
            let matrix = matrices::prefix_opt(n)?;
            let sensitivity = matrix.column_norm(0);
            amplification_row(c, n, &matrix, sensitivity, cfg)
        })
        .collect()
}

/// Restarted binary trees of height `h`: i.i.d. sampling with
/// probability `p` against `2^(h-1)`-min-sep sampling.
pub fn tree_restart_sweep(n: usize, height: u32, p: f64, sigmas: &[f64], cfg: &SweepConfig) -> Result<Vec<RestartRow>> {
    let matrix = matrices::tree_restart(n, height)?;
    let b = 1usize << (height - 1);
    sigmas
        .par_iter()
        .map(|&sigma| {
            let iid = mmcc(&matrix, &cfg.params(p, sigma))?;
            let mut banded = cfg.params(p, sigma);
            banded.b = b;
            let minsep = generalized_mmcc_all_groups(&matrix, &banded)?;
            Ok(RestartRow {
                sigma,
                eps_mmcc_iid: iid.epsilon,
                eps_banded_minsep: minsep.epsilon,
            })
        })
        .collect()
}
