//! Amplified accounting for matrix mechanisms.
//!
//! Every row of `C` is dominated, conditionally on the earlier outputs, by
//! a product mixture of Gaussians whose inclusion probabilities are the
//! tail bounds `ptilde`. Composing the row PLDs and paying `delta1` for
//! the bad events gives an `(eps, delta1 + delta2)` guarantee.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::matrices::EncoderMatrix;
use crate::mog::{pld_from_mog, Adjacency, SensitivityPmf};
use crate::pld::{compose_all_truncated, DiscretePld, DiscretizationConfig};
use crate::special::ceil_to_grid;
use crate::tail_bounds::{block_tail_bounds, TailBoundTable};

/// Which orientations of zero-out adjacency to account for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AdjacencyMode {
    Remove,
    Add,
    /// Both orientations; the larger epsilon is reported.
    #[default]
    Both,
}

impl AdjacencyMode {
    pub fn orientations(self) -> &'static [Adjacency] {
        match self {
            AdjacencyMode::Remove => &[Adjacency::Remove],
            AdjacencyMode::Add => &[Adjacency::Add],
            AdjacencyMode::Both => &[Adjacency::Remove, Adjacency::Add],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountingParams {
    /// Per-round sampling probability.
    pub p: f64,
    pub sigma: f64,
    /// Budget for the tail-bound bad events.
    pub delta1: f64,
    /// Budget for the PLD query.
    pub delta2: f64,
    /// Minimum separation; 1 is i.i.d. Poisson sampling.
    pub b: usize,
    pub adjacency: AdjacencyMode,
    pub discretization: DiscretizationConfig,
    /// Build one PLD per distinct row instead of one per row.
    pub dedup: bool,
}

impl AccountingParams {
    pub fn new(p: f64, sigma: f64, delta1: f64, delta2: f64) -> Self {
        Self {
            p,
            sigma,
            delta1,
            delta2,
            b: 1,
            adjacency: AdjacencyMode::Both,
            discretization: DiscretizationConfig::default(),
            dedup: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return invalid("p must lie in (0, 1]");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return invalid("sigma must be positive");
        }
        if !(0.0..1.0).contains(&self.delta1) || !(self.delta2 > 0.0 && self.delta2 < 1.0) {
            return invalid("delta1 must lie in [0, 1) and delta2 in (0, 1)");
        }
        if self.delta1 + self.delta2 >= 1.0 {
            return invalid("delta1 + delta2 must be below 1");
        }
        if self.b == 0 {
            return invalid("b must be at least 1");
        }
        self.discretization.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountingResult {
    pub epsilon: f64,
    /// `delta1 + delta2`.
    pub delta_total: f64,
    /// Failure budget actually spent; 0 when the tail bounds are trivial.
    pub delta1: f64,
    pub delta2: f64,
    pub max_ptilde: f64,
    pub max_ptilde_over_p: f64,
    pub unique_rows: usize,
    pub rows: usize,
    /// Wall-clock time. The core has no clock and leaves this at 0.
    pub runtime_ms: u64,
    /// Set when `C` is not square lower-triangular, so the guarantee only
    /// covers non-adaptive inputs.
    pub non_adaptive_only: bool,
}

/// Composes the groups in order and queries epsilon at `delta2`. Returns
/// `(epsilon, delta1 + delta2)`.
pub fn compose_with_failure(
    row_plds: &[(DiscretePld, u64)],
    delta1: f64,
    delta2: f64,
    tail_mass: f64,
) -> Result<(f64, f64)> {
    let composed = compose_all_truncated(row_plds, tail_mass)?;
    Ok((composed.epsilon_for_delta(delta2)?, delta1 + delta2))
}

/// One row of the dominating product mixture: `(sensitivity as a multiple
/// of the sensitivity grid, inclusion probability)` in canonical order.
type RowKey = Vec<(u64, u64)>;

struct Rows {
    keys: Vec<RowKey>,
    max_ptilde: f64,
}

impl Rows {
    fn new() -> Self {
        Self {
            keys: Vec::new(),
            max_ptilde: 0.0,
        }
    }

    fn push(&mut self, mut entries: Vec<(u64, f64)>) {
        for e in &entries {
            self.max_ptilde = self.max_ptilde.max(e.1);
        }
        entries.sort_by_key(|&(k, p)| (k, p.to_bits()));
        self.keys.push(entries.into_iter().map(|(k, p)| (k, p.to_bits())).collect());
    }
}

/// Runs the MMCC pipeline (`params.b` must be 1).
pub fn mmcc(c: &EncoderMatrix, params: &AccountingParams) -> Result<AccountingResult> {
    if params.b != 1 {
        return invalid("mmcc requires b = 1; use generalized_mmcc");
    }
    generalized_mmcc(c, params)
}

/// The same pipeline with every `ptilde` replaced by `p` and no failure
/// budget. This is a heuristic lower bound, not a DP guarantee.
pub fn mmcc_independent_lower(c: &EncoderMatrix, params: &AccountingParams) -> Result<AccountingResult> {
    params.validate()?;
    let grid = params.discretization.sensitivity_grid;
    let mut rows = Rows::new();
    for i in 0..c.rows() {
        rows.push(
            c.row(i)
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| (ceil_to_grid(v, grid) as u64, params.p))
                .collect(),
        );
    }
    finish(rows, params, params.p, 0.0, !c.is_lower_triangular())
}

/// Accounting under b-min-sep sampling for the examples of the first group:
/// keep columns `0, b, 2b, ...`, bound participation with probability
/// `b p`, and treat each block of `b` rows as one Gaussian step whose
/// per-column sensitivity is the norm of the column segment.
pub fn generalized_mmcc(c: &EncoderMatrix, params: &AccountingParams) -> Result<AccountingResult> {
    params.validate()?;
    let b = params.b;
    let prob = b as f64 * params.p;
    if prob > 1.0 {
        return invalid("b * p must not exceed 1");
    }
    let reduced = if b == 1 {
        c.clone()
    } else {
        let keep: Vec<usize> = (0..c.cols()).step_by(b).collect();
        c.select_columns(&keep)?
    };
    let grid = params.discretization.sensitivity_grid;
    let (m, n) = (reduced.rows(), reduced.cols());
    let table: Option<TailBoundTable> = if prob >= 1.0 {
        None
    } else {
        Some(block_tail_bounds(&reduced, prob, params.sigma, params.delta1, b)?)
    };
    let mut rows = Rows::new();
    for blk in 0..m.div_ceil(b) {
        let span = blk * b..((blk + 1) * b).min(m);
        let mut entries = Vec::new();
        for j in 0..n {
            let norm = if span.len() == 1 {
                reduced.get(span.start, j)
            } else {
                libm::sqrt(span.clone().map(|i| reduced.get(i, j) * reduced.get(i, j)).sum())
            };
            if norm > 0.0 {
                let pt = table.as_ref().map_or(1.0, |t| t.get(blk, j));
                entries.push((ceil_to_grid(norm, grid) as u64, pt));
            }
        }
        rows.push(entries);
    }
    let spent = match &table {
        Some(t) if !t.is_trivial() => params.delta1,
        _ => 0.0,
    };
    let mut result = finish(rows, params, prob, spent, !c.is_lower_triangular())?;
    if table.is_none() {
        result.max_ptilde = 1.0;
        result.max_ptilde_over_p = 1.0 / prob;
    }
    Ok(result)
}

/// Worst case of [`generalized_mmcc`] over the `b` groups; group `g`
/// sees `C` with its first `g` rows and columns removed.
pub fn generalized_mmcc_all_groups(c: &EncoderMatrix, params: &AccountingParams) -> Result<AccountingResult> {
    let mut worst: Option<AccountingResult> = None;
    for g in 0..params.b.max(1) {
        let sub = if g == 0 { c.clone() } else { c.trailing(g, g)? };
        let r = generalized_mmcc(&sub, params)?;
        if worst.as_ref().is_none_or(|w| r.epsilon > w.epsilon) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("at least one group"))
}

/// Per-group epsilons of [`generalized_mmcc_all_groups`], group 0 first.
pub fn generalized_mmcc_group_epsilons(c: &EncoderMatrix, params: &AccountingParams) -> Result<Vec<f64>> {
    (0..params.b.max(1))
        .map(|g| {
            let sub = if g == 0 { c.clone() } else { c.trailing(g, g)? };
            Ok(generalized_mmcc(&sub, params)?.epsilon)
        })
        .collect()
}

fn finish(rows: Rows, params: &AccountingParams, base_p: f64, delta1: f64, non_adaptive_only: bool) -> Result<AccountingResult> {
    let cfg = &params.discretization;
    let row_count = rows.keys.len();
    // Distinct keys in order of first appearance.
    let mut index: BTreeMap<&RowKey, usize> = BTreeMap::new();
    let mut unique: Vec<&RowKey> = Vec::new();
    let mut row_group = Vec::with_capacity(row_count);
    for key in &rows.keys {
        let next = unique.len();
        let g = *index.entry(key).or_insert(next);
        if g == next {
            unique.push(key);
        }
        row_group.push(g);
    }
    // Without dedup every row's PLD is built on its own.
    let build: Vec<&RowKey> = if params.dedup { unique.clone() } else { rows.keys.iter().collect() };
    let orientations = params.adjacency.orientations();
    let built = build_plds(&build, params.sigma, cfg, orientations)?;

    let mut epsilon: f64 = 0.0;
    for (o, _) in orientations.iter().enumerate() {
        let row_pld = |r: usize| -> &DiscretePld {
            if params.dedup {
                &built[row_group[r]][o]
            } else {
                &built[r][o]
            }
        };
        // Rows with bit-identical PLDs form one group, ordered by first
        // appearance, so the composition order does not depend on dedup.
        let mut groups: Vec<(DiscretePld, u64)> = Vec::new();
        for r in 0..row_count {
            let pld = row_pld(r);
            match groups.iter_mut().find(|(g, _)| g == pld) {
                Some(g) => g.1 += 1,
                None => groups.push((pld.clone(), 1)),
            }
        }
        let (eps, _) = compose_with_failure(&groups, delta1, params.delta2, cfg.tail_truncation_mass)?;
        epsilon = epsilon.max(eps);
    }
    let max_ptilde = rows.max_ptilde;
    Ok(AccountingResult {
        epsilon,
        delta_total: delta1 + params.delta2,
        delta1,
        delta2: params.delta2,
        max_ptilde,
        max_ptilde_over_p: max_ptilde / base_p,
        unique_rows: unique.len(),
        rows: row_count,
        runtime_ms: 0,
        non_adaptive_only,
    })
}

fn row_plds(key: &RowKey, sigma: f64, cfg: &DiscretizationConfig, orientations: &[Adjacency]) -> Result<Vec<DiscretePld>> {
    let pairs: Vec<(u64, f64)> = key.iter().map(|&(k, p)| (k, f64::from_bits(p))).collect();
    let mog = SensitivityPmf::from_lattice(cfg.sensitivity_grid, &pairs).to_mixture(sigma)?;
    orientations.iter().map(|&a| pld_from_mog(&mog, cfg, a)).collect()
}

#[cfg(feature = "parallel")]
fn build_plds(
    keys: &[&RowKey],
    sigma: f64,
    cfg: &DiscretizationConfig,
    orientations: &[Adjacency],
) -> Result<Vec<Vec<DiscretePld>>> {
    use rayon::prelude::*;
    keys.par_iter().map(|k| row_plds(k, sigma, cfg, orientations)).collect()
}

#[cfg(not(feature = "parallel"))]
fn build_plds(
    keys: &[&RowKey],
    sigma: f64,
    cfg: &DiscretizationConfig,
    orientations: &[Adjacency],
) -> Result<Vec<Vec<DiscretePld>>> {
    keys.iter().map(|k| row_plds(k, sigma, cfg, orientations)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{binary_tree, identity};
    use crate::mog::MixtureGaussian;

    #[test]
    fn point_mass_composition() {
        let id = DiscretePld::identity(1e-4);
        let (eps, d) = compose_with_failure(&[(id, 1)], 1e-6, 1e-6, 1e-12).unwrap();
        assert_eq!(eps, 0.0);
        assert!((d - 2e-6).abs() < 1e-20);
    }

    #[test]
    fn identity_rows_dedup_to_one() {
        let params = AccountingParams::new(0.25, 1.0, 1e-6, 1e-6);
        let r = mmcc(&identity(8).unwrap(), &params).unwrap();
        assert_eq!((r.unique_rows, r.rows), (1, 8));
        assert_eq!(r.delta1, 0.0);
        assert_eq!(r.delta_total, 1e-6);
        assert_eq!(r.max_ptilde, 0.25);
        assert!(!r.non_adaptive_only);
    }

    #[test]
    fn unamplified_tree() {
        // p = 1: every column is always included, row sensitivities (1, 1, 2).
        let params = AccountingParams::new(1.0, 2.0, 1e-6, 1e-6);
        let r = mmcc(&binary_tree(2).unwrap(), &params).unwrap();
        let expect = crate::analytic::gaussian_epsilon(6f64.sqrt(), 2.0, 1e-6).unwrap();
        assert!(r.epsilon >= expect - 1e-9 && r.epsilon <= expect + 2e-3, "{} vs {}", r.epsilon, expect);
        assert!(r.non_adaptive_only);
        assert_eq!(r.delta1, 0.0);
    }

    #[test]
    fn dedup_is_bit_identical() {
        let c = binary_tree(8).unwrap();
        let mut params = AccountingParams::new(0.125, 3.0, 1e-7, 1e-7);
        let a = mmcc(&c, &params).unwrap();
        params.dedup = false;
        let b = mmcc(&c, &params).unwrap();
        assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
    }

    #[test]
    fn b_one_matches_mmcc() {
        let c = binary_tree(4).unwrap();
        let params = AccountingParams::new(0.25, 2.0, 1e-6, 1e-6);
        let a = mmcc(&c, &params).unwrap();
        let b = generalized_mmcc(&c, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(generalized_mmcc_all_groups(&c, &params).unwrap(), b);
    }

    #[test]
    fn single_row_is_subsampled_gaussian() {
        let c = EncoderMatrix::new(1, 1, alloc::vec![1.0]).unwrap();
        let mut params = AccountingParams::new(0.1, 1.0, 0.0, 1e-5);
        params.adjacency = AdjacencyMode::Remove;
        let r = mmcc(&c, &params).unwrap();
        let cfg = DiscretizationConfig::default();
        let mog = MixtureGaussian::subsampled_gaussian(0.1, 1.0, 1.0).unwrap();
        let pld = pld_from_mog(&mog, &cfg, Adjacency::Remove).unwrap();
        assert_eq!(r.epsilon, pld.epsilon_for_delta(1e-5).unwrap());
    }
}
