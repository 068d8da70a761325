//! High-probability bounds on the conditional participation probabilities.
//!
//! Given the outputs of rows `0..i`, the posterior probability that the
//! sensitive example took part in round `j` is at most `ptilde[i][j]`,
//! except on a bad event of total probability `delta1`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::matrices::EncoderMatrix;
use crate::special::{log_binomial_pmf, norm_isf};

/// Relative slack on the tail budget so rounding in the PMF sum never
/// picks a count that is too small.
const BUDGET_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TailBoundTable {
    rows: usize,
    cols: usize,
    block: usize,
    values: Vec<f64>,
    base_probability: f64,
    failure_budget: f64,
    per_event_budget: Option<f64>,
    normal_quantile: Option<f64>,
    events: usize,
}

impl TailBoundTable {
    /// Number of table rows (row blocks when `block > 1`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn base_probability(&self) -> f64 {
        self.base_probability
    }

    pub fn failure_budget(&self) -> f64 {
        self.failure_budget
    }

    /// `delta'`, or `None` when every used entry is a column head and no
    /// failure budget is spent.
    pub fn per_event_budget(&self) -> Option<f64> {
        self.per_event_budget
    }

    pub fn normal_quantile(&self) -> Option<f64> {
        self.normal_quantile
    }

    /// Number of non-trivial (row, column) pairs sharing the budget.
    pub fn events(&self) -> usize {
        self.events
    }

    pub fn is_trivial(&self) -> bool {
        self.events == 0
    }
}

/// Smallest `t` with `Pr[Binomial(trials, prob) > t] <= budget`.
pub fn binomial_tail_count(trials: u64, prob: f64, budget: f64) -> u64 {
    if trials == 0 || prob <= 0.0 {
        return 0;
    }
    let limit = budget * (1.0 - BUDGET_SLACK);
    let mut tail = 0.0;
    let mut t = trials;
    while t > 0 {
        let above = tail + libm::exp(log_binomial_pmf(trials, t, prob));
        if above > limit {
            break;
        }
        tail = above;
        t -= 1;
    }
    t
}

/// Upper bound on the `budget`-quantile of
/// `sum_j' x_j' <C[0..i, j], C[0..i, j']>` with `x_j' ~ Bernoulli(prob)`:
/// the sum of the `t` largest dot products, `t` from
/// [`binomial_tail_count`]. `i` is a 0-based row index; rows `0..i` form
/// the prefix.
pub fn s_upper_bound(c: &EncoderMatrix, i: usize, j: usize, prob: f64, budget: f64) -> f64 {
    let dots: Vec<f64> = (0..c.cols())
        .map(|k| (0..i).map(|r| c.get(r, j) * c.get(r, k)).sum())
        .collect();
    sum_of_largest(dots, i + 1, prob, budget)
}

fn sum_of_largest(mut dots: Vec<f64>, min_trials: usize, prob: f64, budget: f64) -> f64 {
    dots.retain(|&d| d > 0.0);
    let trials = min_trials.max(dots.len()) as u64;
    let t = binomial_tail_count(trials, prob, budget) as usize;
    largest_sum(&mut dots, t)
}

fn largest_sum(dots: &mut [f64], t: usize) -> f64 {
    dots.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    dots.iter().take(t).sum()
}

/// Conditional participation bound from the privacy loss of the prefix:
/// `p e^eps / (p e^eps + 1 - p)`, clamped to `[p, 1]`.
pub fn conditional_probability(p: f64, epsilon: f64) -> f64 {
    let scaled = p * libm::exp(epsilon);
    let v = scaled / (scaled + (1.0 - p));
    if v.is_nan() {
        1.0
    } else {
        v.clamp(p, 1.0)
    }
}

/// Participation bounds for every entry of `C`.
pub fn probability_tail_bounds(c: &EncoderMatrix, p: f64, sigma: f64, delta1: f64) -> Result<TailBoundTable> {
    block_tail_bounds(c, p, sigma, delta1, 1)
}

/// Participation bounds evaluated at the first row of each block of
/// `block` consecutive rows. Entry `(r, j)` is 1 when the block is zero in
/// column `j`, `p` when rows before the block are zero in column `j`, and
/// the tail bound at the block's first row otherwise.
pub fn block_tail_bounds(c: &EncoderMatrix, p: f64, sigma: f64, delta1: f64, block: usize) -> Result<TailBoundTable> {
    if !(p > 0.0 && p <= 1.0) {
        return invalid("sampling probability must lie in (0, 1]");
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return invalid("sigma must be positive");
    }
    if !(0.0..1.0).contains(&delta1) {
        return invalid("delta1 must lie in [0, 1)");
    }
    if block == 0 {
        return invalid("block size must be at least 1");
    }
    let (m, n) = (c.rows(), c.cols());
    let blocks = m.div_ceil(block);
    let mut first_nonzero = vec![usize::MAX; n];
    for i in (0..m).rev() {
        for (j, &v) in c.row(i).iter().enumerate() {
            if v != 0.0 {
                first_nonzero[j] = i;
            }
        }
    }
    let active = |b: usize, j: usize| (b * block..((b + 1) * block).min(m)).any(|i| c.get(i, j) != 0.0);
    let mut events = 0;
    for b in 0..blocks {
        for (j, &first) in first_nonzero.iter().enumerate() {
            if first < b * block && active(b, j) {
                events += 1;
            }
        }
    }
    let mut values = vec![1.0; blocks * n];
    let (per_event_budget, normal_quantile) = if events == 0 {
        (None, None)
    } else {
        let d = delta1 / (2.0 * events as f64);
        (Some(d), Some(norm_isf(d)))
    };
    let mut gram = vec![0.0; n * n];
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nz = Vec::with_capacity(n);
    let mut dots = Vec::with_capacity(n);
    for b in 0..blocks {
        let start = b * block;
        for j in 0..n {
            if !active(b, j) {
                continue;
            }
            let v = if first_nonzero[j] >= start {
                p
            } else {
                let (budget, z) = (per_event_budget.unwrap_or(0.0), normal_quantile.unwrap_or(f64::INFINITY));
                let row = &gram[j * n..(j + 1) * n];
                dots.clear();
                dots.extend(row.iter().copied().filter(|&d| d > 0.0));
                let trials = (start + 1).max(dots.len());
                let t = *counts
                    .entry(trials)
                    .or_insert_with(|| binomial_tail_count(trials as u64, p, budget) as usize);
                let s = largest_sum(&mut dots, t);
                let norm_sq = row[j];
                let eps = z * libm::sqrt(norm_sq) / sigma + (2.0 * s - norm_sq) / (2.0 * sigma * sigma);
                conditional_probability(p, eps.max(0.0))
            };
            values[b * n + j] = v;
        }
        for i in start..((b + 1) * block).min(m) {
            let row = c.row(i);
            nz.clear();
            nz.extend((0..n).filter(|&j| row[j] != 0.0));
            for &a in &nz {
                for &k in &nz {
                    gram[a * n + k] += row[a] * row[k];
                }
            }
        }
    }
    Ok(TailBoundTable {
        rows: blocks,
        cols: n,
        block,
        values,
        base_probability: p,
        failure_budget: delta1,
        per_event_budget,
        normal_quantile,
        events,
    })
}
