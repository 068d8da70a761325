//! Discretized privacy loss distributions.
//!
//! A [`DiscretePld`] stores the probability of each privacy loss on the
//! lattice `k * grid` plus the mass of the loss `+inf`. Composition of
//! independent mechanisms is convolution of these mass sequences.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fft;

const MASS_TOLERANCE: f64 = 1e-9;
const RENORMALIZE_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationConfig {
    /// Spacing of the privacy-loss lattice.
    pub pld_grid: f64,
    /// Sensitivities are rounded up to multiples of this value.
    pub sensitivity_grid: f64,
    /// Inverse privacy losses are rounded up to multiples of this value.
    pub inverse_tolerance: f64,
    /// Mass folded away per side when truncating a loss grid.
    pub tail_truncation_mass: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            pld_grid: 1e-4,
            sensitivity_grid: 1e-3,
            inverse_tolerance: 1e-6,
            tail_truncation_mass: 1e-12,
        }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.pld_grid) {
            return invalid("pld_grid must be positive");
        }
        if !positive(self.sensitivity_grid) {
            return invalid("sensitivity_grid must be positive");
        }
        if !positive(self.inverse_tolerance) {
            return invalid("inverse_tolerance must be positive");
        }
        if !(positive(self.tail_truncation_mass) && self.tail_truncation_mass <= 1e-6) {
            return invalid("tail_truncation_mass must lie in (0, 1e-6]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePld {
    grid: f64,
    origin: i64,
    masses: Vec<f64>,
    infinity_mass: f64,
}

impl DiscretePld {
    /// Builds a PLD where `masses[k]` is the probability of the loss
    /// `(origin + k) * grid`. Zero buckets at either end are dropped.
    pub fn new(grid: f64, origin: i64, masses: Vec<f64>, infinity_mass: f64) -> Result<Self> {
        if !(grid.is_finite() && grid > 0.0) {
            return invalid("grid spacing must be positive");
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid("masses must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&infinity_mass) {
            return invalid("infinity mass must lie in [0, 1]");
        }
        let total: f64 = masses.iter().sum::<f64>() + infinity_mass;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return invalid("masses and infinity mass must sum to 1");
        }
        Ok(Self::from_parts(grid, origin, masses, infinity_mass))
    }

    /// Point mass at the loss `index * grid`.
    pub fn point_mass(grid: f64, index: i64) -> Self {
        Self::from_parts(grid, index, alloc::vec![1.0], 0.0)
    }

    /// The PLD of two identical distributions.
    pub fn identity(grid: f64) -> Self {
        Self::point_mass(grid, 0)
    }

    pub(crate) fn from_parts(grid: f64, origin: i64, mut masses: Vec<f64>, infinity_mass: f64) -> Self {
        let end = masses.iter().rposition(|&m| m > 0.0).map_or(0, |i| i + 1);
        masses.truncate(end);
        let start = masses.iter().position(|&m| m > 0.0).unwrap_or(0);
        if start > 0 {
            masses.drain(..start);
        }
        Self {
            grid,
            origin: origin + start as i64,
            masses,
            infinity_mass,
        }
    }

    pub fn grid(&self) -> f64 {
        self.grid
    }

    /// Lattice index of `masses()[0]`.
    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn infinity_mass(&self) -> f64 {
        self.infinity_mass
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Privacy loss of bucket `k`.
    #[inline]
    pub fn loss(&self, k: usize) -> f64 {
        (self.origin + k as i64) as f64 * self.grid
    }

    /// Largest finite loss with positive mass.
    pub fn max_loss(&self) -> Option<f64> {
        (!self.masses.is_empty()).then(|| self.loss(self.masses.len() - 1))
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.infinity_mass
    }

    /// Hockey-stick divergence `E[max(1 - e^(eps - L), 0)]`, with the
    /// infinite loss contributing its full mass.
    pub fn delta_for_epsilon(&self, epsilon: f64) -> f64 {
        let mut delta = 0.0;
        for k in (0..self.masses.len()).rev() {
            let loss = self.loss(k);
            if loss <= epsilon {
                break;
            }
            delta += self.masses[k] * -libm::expm1(epsilon - loss);
        }
        (delta + self.infinity_mass).clamp(self.infinity_mass, 1.0)
    }

    /// Smallest `eps >= 0` with `delta_for_epsilon(eps) <= delta`.
    ///
    /// The divergence is `A - e^eps * B` between consecutive lattice
    /// losses, so the crossing is solved in closed form on the bracketing
    /// interval and then nudged upward until the forward evaluation agrees.
    pub fn epsilon_for_delta(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        if self.infinity_mass > delta {
            return Err(Error::Unachievable {
                delta,
                infinity_mass: self.infinity_mass,
            });
        }
        if self.delta_for_epsilon(0.0) <= delta {
            return Ok(0.0);
        }
        let mut above = self.infinity_mass;
        let mut weighted = 0.0;
        let mut eps = 0.0;
        for k in (0..self.masses.len()).rev() {
            let upper = self.loss(k);
            above += self.masses[k];
            weighted += self.masses[k] * libm::exp(-upper);
            let lower = if k > 0 { self.loss(k - 1) } else { f64::NEG_INFINITY };
            let at_lower = if k > 0 {
                above - libm::exp(lower) * weighted
            } else {
                above
            };
            if at_lower > delta {
                eps = if weighted > 0.0 {
                    libm::log((above - delta) / weighted)
                } else {
                    upper
                };
                eps = eps.clamp(lower.max(0.0), upper);
                break;
            }
        }
        let mut step = f64::EPSILON * eps.max(1.0);
        while self.delta_for_epsilon(eps) > delta {
            eps += step;
            step *= 2.0;
        }
        Ok(eps)
    }

    /// Distribution of the sum of the two independent privacy losses.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.grid.to_bits() != other.grid.to_bits() {
            return Err(Error::GridMismatch {
                left: self.grid,
                right: other.grid,
            });
        }
        let mut masses = fft::convolve_nonneg(&self.masses, &other.masses);
        let target = self.masses.iter().sum::<f64>() * other.masses.iter().sum::<f64>();
        let actual: f64 = masses.iter().sum();
        let drift = target - actual;
        if drift != 0.0 && drift.abs() <= RENORMALIZE_LIMIT {
            if let Some(largest) = masses
                .iter_mut()
                .max_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal))
            {
                *largest = (*largest + drift).max(0.0);
            }
        }
        let (a, b) = (self.infinity_mass, other.infinity_mass);
        Ok(Self::from_parts(
            self.grid,
            self.origin + other.origin,
            masses,
            (a + b - a * b).min(1.0),
        ))
    }

    /// `count`-fold composition with itself by repeated squaring.
    /// `count == 0` gives the identity PLD.
    pub fn self_compose(&self, count: u64) -> Self {
        self.self_compose_with(count, None)
    }

    fn self_compose_with(&self, count: u64, tail_mass: Option<f64>) -> Self {
        let squash = |pld: Self| match tail_mass {
            Some(t) => pld.truncated(t),
            None => pld,
        };
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut remaining = count;
        while remaining > 0 {
            if remaining & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(acc) => squash(acc.compose(&base).expect("same grid")),
                });
            }
            remaining >>= 1;
            if remaining > 0 {
                base = squash(base.compose(&base).expect("same grid"));
            }
        }
        result.unwrap_or_else(|| Self::identity(self.grid))
    }

    /// Folds at most `tail_mass` of the largest finite losses into the
    /// infinity mass and moves at most `tail_mass` of the smallest losses
    /// up to the lowest retained bucket. Both moves can only increase delta.
    pub fn truncated(&self, tail_mass: f64) -> Self {
        let n = self.masses.len();
        if n <= 1 || tail_mass <= 0.0 {
            return self.clone();
        }
        let mut hi = n;
        let mut upper = 0.0;
        while hi > 1 && upper + self.masses[hi - 1] <= tail_mass {
            upper += self.masses[hi - 1];
            hi -= 1;
        }
        let mut lo = 0;
        let mut lower = 0.0;
        while lo + 1 < hi && lower + self.masses[lo] <= tail_mass {
            lower += self.masses[lo];
            lo += 1;
        }
        if lo == 0 && hi == n {
            return self.clone();
        }
        let mut masses = self.masses[lo..hi].to_vec();
        masses[0] += lower;
        Self::from_parts(
            self.grid,
            self.origin + lo as i64,
            masses,
            (self.infinity_mass + upper).min(1.0),
        )
    }
}

/// Composes `(pld, count)` groups in the given order. Each group is
/// self-composed by repeated squaring, then folded into the running result.
pub fn compose_all(plds: &[(DiscretePld, u64)]) -> Result<DiscretePld> {
    compose_groups(plds, None)
}

/// [`compose_all`] with [`DiscretePld::truncated`] applied after every
/// convolution.
pub fn compose_all_truncated(plds: &[(DiscretePld, u64)], tail_mass: f64) -> Result<DiscretePld> {
    compose_groups(plds, Some(tail_mass))
}

fn compose_groups(plds: &[(DiscretePld, u64)], tail_mass: Option<f64>) -> Result<DiscretePld> {
    let Some((first, _)) = plds.first() else {
        return invalid("nothing to compose");
    };
    if let Some((bad, _)) = plds.iter().find(|(p, _)| p.grid.to_bits() != first.grid.to_bits()) {
        return Err(Error::GridMismatch {
            left: first.grid,
            right: bad.grid,
        });
    }
    if plds.iter().any(|(_, c)| *c == 0) {
        return invalid("repetition counts must be at least 1");
    }
    let mut acc: Option<DiscretePld> = None;
    for (pld, count) in plds {
        let group = pld.self_compose_with(*count, tail_mass);
        acc = Some(match acc {
            None => group,
            Some(prev) => {
                let next = prev.compose(&group)?;
                match tail_mass {
                    Some(t) => next.truncated(t),
                    None => next,
                }
            }
        });
    }
    Ok(acc.expect("non-empty"))
}
