//! Mixture-of-Gaussians privacy losses.
//!
//! A mixture-of-Gaussians (MoG) mechanism outputs `N(0, sigma^2)` on one
//! dataset and `N(s, sigma^2)` on its neighbour, where the sensitivity `s`
//! is drawn from a finite distribution. Losses follow the decreasing
//! convention: under the remove orientation the loss at `x` is
//! `ln(sum_i p_i exp((-2 c_i x - c_i^2) / (2 sigma^2)))` and `x` is drawn
//! from the mixture of `N(-c_i, sigma^2)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::pld::{DiscretePld, DiscretizationConfig};
use crate::special::{self, ceil_to_grid, floor_to_grid, norm_cdf, norm_sf};

const PROB_TOLERANCE: f64 = 1e-9;
const MAX_BUCKETS: i64 = 200_000_000;

/// Which dataset of the neighbouring pair holds the sensitive example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Adjacency {
    /// The first dataset contains the example, the second has it zeroed out.
    Remove,
    /// The second dataset contains the example.
    Add,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGaussian {
    probabilities: Vec<f64>,
    sensitivities: Vec<f64>,
    sigma: f64,
}

impl MixtureGaussian {
    pub fn new(probabilities: Vec<f64>, sensitivities: Vec<f64>, sigma: f64) -> Result<Self> {
        if probabilities.is_empty() || probabilities.len() != sensitivities.len() {
            return invalid("probabilities and sensitivities must be non-empty and of equal length");
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return invalid("sigma must be positive");
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("probabilities must lie in [0, 1]");
        }
        if sensitivities.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return invalid("sensitivities must be finite and non-negative");
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return invalid("probabilities must sum to 1");
        }
        Ok(Self {
            probabilities,
            sensitivities,
            sigma,
        })
    }

    /// Gaussian mechanism with a deterministic sensitivity.
    pub fn gaussian(sensitivity: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![sensitivity], sigma)
    }

    /// Poisson-subsampled Gaussian: sensitivity `c` with probability `p`,
    /// otherwise 0.
    pub fn subsampled_gaussian(p: f64, sensitivity: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid("sampling probability must lie in [0, 1]");
        }
        Self::new(vec![1.0 - p, p], vec![0.0, sensitivity], sigma)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sensitivities(&self) -> &[f64] {
        &self.sensitivities
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Privacy loss at `x` under the remove orientation.
    pub fn privacy_loss(&self, x: f64) -> f64 {
        LossModel::new(self, Adjacency::Remove).eval(x).loss
    }

    /// Privacy loss at `x` for either orientation; both are non-increasing.
    pub fn privacy_loss_for(&self, adjacency: Adjacency, x: f64) -> f64 {
        LossModel::new(self, adjacency).eval(x).loss
    }

    /// CDF of the remove-orientation sampling distribution,
    /// `sum_i p_i Phi((x + c_i) / sigma)`.
    pub fn mixture_cdf(&self, x: f64) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.sensitivities)
            .map(|(p, c)| p * norm_cdf((x + c) / self.sigma))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// Smallest multiple `x` of `grid` with `privacy_loss(x) <= y`, so that
    /// `L(x) <= y < L(x - grid)`.
    pub fn inverse_privacy_loss(&self, y: f64, grid: f64) -> Result<f64> {
        if !(grid.is_finite() && grid > 0.0) {
            return invalid("inverse grid must be positive");
        }
        let model = LossModel::new(self, Adjacency::Remove);
        if model.is_constant() || !(y > model.inf && y < model.sup) {
            return Err(Error::OutOfRange {
                loss: y,
                lower: model.inf,
                upper: model.sup,
            });
        }
        let guess = model.solve_continuous(y, 0.0);
        let (g, _) = model.grid_search(y, libm::round(guess / grid) as i64, grid);
        Ok(g as f64 * grid)
    }

    /// Pessimistic compaction: walking up in sensitivity, components whose
    /// (carried) probability is below `min_mass` are merged into the next
    /// larger sensitivity. The largest sensitivity is always kept. Moving
    /// probability to a larger sensitivity can only increase the hockey-stick
    /// divergence.
    pub fn compacted(&self, min_mass: f64) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.sensitivities[a]
                .partial_cmp(&self.sensitivities[b])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let mut probabilities = Vec::new();
        let mut sensitivities: Vec<f64> = Vec::new();
        let mut carry = 0.0;
        for (pos, &i) in order.iter().enumerate() {
            let mass = self.probabilities[i] + carry;
            let last = pos + 1 == order.len();
            if mass <= 0.0 && !last {
                continue;
            }
            if mass < min_mass && !last {
                carry = mass;
                continue;
            }
            carry = 0.0;
            match sensitivities.last() {
                Some(&c) if c == self.sensitivities[i] => {
                    *probabilities.last_mut().expect("paired") += mass;
                }
                _ => {
                    sensitivities.push(self.sensitivities[i]);
                    probabilities.push(mass);
                }
            }
        }
        Self {
            probabilities,
            sensitivities,
            sigma: self.sigma,
        }
    }
}

/// Product mixture: column `j` contributes sensitivity `c_j` independently
/// with probability `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMixture {
    probabilities: Vec<f64>,
    sensitivities: Vec<f64>,
    sigma: f64,
}

impl ProductMixture {
    pub fn new(probabilities: Vec<f64>, sensitivities: Vec<f64>, sigma: f64) -> Result<Self> {
        if probabilities.len() != sensitivities.len() {
            return invalid("probabilities and sensitivities must have equal length");
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return invalid("sigma must be positive");
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("probabilities must lie in [0, 1]");
        }
        if sensitivities.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return invalid("sensitivities must be finite and non-negative");
        }
        Ok(Self {
            probabilities,
            sensitivities,
            sigma,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sensitivities(&self) -> &[f64] {
        &self.sensitivities
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Distribution of a sensitivity supported on multiples of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityPmf {
    grid: f64,
    /// `(multiple of grid, probability)`, ascending, no zero masses.
    atoms: Vec<(u64, f64)>,
}

impl SensitivityPmf {
    /// Convolution of the two-point distributions `{0: 1 - p_j, ceil(c_j): p_j}`
    /// with every sensitivity rounded up to a multiple of `grid`.
    pub fn from_product(pm: &ProductMixture, grid: f64) -> Result<Self> {
        if !(grid.is_finite() && grid > 0.0) {
            return invalid("sensitivity grid must be positive");
        }
        let pairs: Vec<(u64, f64)> = pm
            .probabilities
            .iter()
            .zip(&pm.sensitivities)
            .filter(|(p, c)| **p > 0.0 && **c > 0.0)
            .map(|(&p, &c)| (ceil_to_grid(c, grid) as u64, p))
            .collect();
        Ok(Self::from_lattice(grid, &pairs))
    }

    /// Same as [`SensitivityPmf::from_product`] for sensitivities already
    /// given as multiples of `grid`.
    pub fn from_lattice(grid: f64, pairs: &[(u64, f64)]) -> Self {
        let mut parts: Vec<Vec<(u64, f64)>> = pairs
            .iter()
            .filter(|(k, p)| *k > 0 && *p > 0.0)
            .map(|&(k, p)| if p >= 1.0 { vec![(k, 1.0)] } else { vec![(0, 1.0 - p), (k, p)] })
            .collect();
        if parts.is_empty() {
            return Self {
                grid,
                atoms: vec![(0, 1.0)],
            };
        }
        // Pairwise reduction keeps operand sizes balanced.
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(convolve_atoms(&a, &b)),
                    None => next.push(a),
                }
            }
            parts = next;
        }
        let atoms = parts.pop().expect("one part left");
        Self { grid, atoms }
    }

    pub fn grid(&self) -> f64 {
        self.grid
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn to_mixture(&self, sigma: f64) -> Result<MixtureGaussian> {
        let (sens, probs) = self
            .atoms
            .iter()
            .map(|&(k, m)| (k as f64 * self.grid, m))
            .unzip();
        MixtureGaussian::new(probs, sens, sigma)
    }
}

fn convolve_atoms(a: &[(u64, f64)], b: &[(u64, f64)]) -> Vec<(u64, f64)> {
    let span = a.last().map_or(0, |x| x.0) + b.last().map_or(0, |x| x.0) + 1;
    let pairs = (a.len() as u64).saturating_mul(b.len() as u64);
    if a.len().min(b.len()) >= fft::DIRECT_THRESHOLD {
        let dense = |atoms: &[(u64, f64)]| {
            let mut v = vec![0.0; atoms.last().map_or(0, |x| x.0 as usize) + 1];
            for &(k, m) in atoms {
                v[k as usize] = m;
            }
            v
        };
        return fft::convolve_nonneg(&dense(a), &dense(b))
            .into_iter()
            .enumerate()
            .filter(|(_, m)| *m > 0.0)
            .map(|(k, m)| (k as u64, m))
            .collect();
    }
    if span <= pairs.saturating_mul(16).saturating_add(1024) {
        let mut out = vec![0.0; span as usize];
        for &(ka, ma) in a {
            for &(kb, mb) in b {
                out[(ka + kb) as usize] += ma * mb;
            }
        }
        return out
            .into_iter()
            .enumerate()
            .filter(|(_, m)| *m > 0.0)
            .map(|(k, m)| (k as u64, m))
            .collect();
    }
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    for &(ka, ma) in a {
        for &(kb, mb) in b {
            *out.entry(ka + kb).or_insert(0.0) += ma * mb;
        }
    }
    out.into_iter().filter(|(_, m)| *m > 0.0).collect()
}

/// Rounds every sensitivity of the product mixture up to the sensitivity
/// grid and collapses the `2^n` subsets into a mixture over the grid.
pub fn discretize_pmog(pm: &ProductMixture, cfg: &DiscretizationConfig) -> Result<MixtureGaussian> {
    SensitivityPmf::from_product(pm, cfg.sensitivity_grid)?.to_mixture(pm.sigma)
}

/// Mixture with sensitivity `unit * K`, `K ~ Binomial(trials, prob)`.
pub fn mog_from_binomial(trials: u64, prob: f64, unit_sensitivity: f64, sigma: f64) -> Result<MixtureGaussian> {
    if !(0.0..=1.0).contains(&prob) {
        return invalid("probability must lie in [0, 1]");
    }
    let probs = special::binomial_pmf(trials, prob);
    let sens = (0..=trials).map(|k| k as f64 * unit_sensitivity).collect();
    MixtureGaussian::new(renormalized(probs), sens, sigma)
}

/// Mixture with sensitivity `unit * K` where `K` counts how many of the
/// `group` marked records land in a uniformly random batch of `batch`
/// records drawn from `population` (hypergeometric).
pub fn mog_from_hypergeometric(
    population: u64,
    group: u64,
    batch: u64,
    unit_sensitivity: f64,
    sigma: f64,
) -> Result<MixtureGaussian> {
    if group > population || batch > population {
        return invalid("group and batch must not exceed the population");
    }
    let ln_choose = |n: u64, k: u64| {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
    };
    let lo = (batch + group).saturating_sub(population);
    let hi = group.min(batch);
    let mut probs = Vec::new();
    let mut sens = Vec::new();
    for k in lo..=hi {
        let lp = ln_choose(group, k) + ln_choose(population - group, batch - k) - ln_choose(population, batch);
        probs.push(libm::exp(lp));
        sens.push(k as f64 * unit_sensitivity);
    }
    MixtureGaussian::new(renormalized(probs), sens, sigma)
}

fn renormalized(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    if total > 0.0 && (total - 1.0).abs() > f64::EPSILON * 4.0 {
        for p in &mut probs {
            *p /= total;
        }
    }
    probs
}

/// Pessimistic discretized PLD of the MoG mechanism.
///
/// Each lattice loss `k * pld_grid` receives the sampling mass of
/// `[x(k), x(k - 1))`, where `x(y)` is a point of the inverse-tolerance
/// grid with `L(x(y)) <= y`, at most about one grid step right of the
/// exact inverse. This rounds every loss up to the lattice. Mass beyond
/// the `tail_truncation_mass` quantiles is folded into the infinity mass
/// (top) or the lowest bucket (bottom). Components below
/// `tail_truncation_mass` are compacted upward first.
pub fn pld_from_mog(mog: &MixtureGaussian, cfg: &DiscretizationConfig, adjacency: Adjacency) -> Result<DiscretePld> {
    cfg.validate()?;
    let compact = mog.compacted(cfg.tail_truncation_mass);
    let model = LossModel::new(&compact, adjacency);
    if model.is_constant() {
        return Ok(DiscretePld::identity(cfg.pld_grid));
    }
    let tau = cfg.tail_truncation_mass;
    let dx = cfg.inverse_tolerance;
    let grid = cfg.pld_grid;

    let x_lo = model.sampling_quantile_lower(tau);
    let x_hi = model.sampling_quantile_upper(tau);
    let mut k_top = ceil_to_grid(model.eval(x_lo).loss, grid);
    if model.sup.is_finite() {
        k_top = k_top.min(ceil_to_grid(model.sup, grid));
    }
    let mut k_bot = floor_to_grid(model.eval(x_hi).loss, grid);
    if model.inf.is_finite() {
        k_bot = k_bot.max(floor_to_grid(model.inf, grid));
    }
    k_bot = k_bot.min(k_top);
    if k_top - k_bot > MAX_BUCKETS {
        return invalid("privacy loss range too wide for the PLD grid");
    }

    let n_buckets = (k_top - k_bot + 1) as usize;
    let mut masses = vec![0.0; n_buckets];
    let mut prev: Option<(Boundary, Vec<Tail>)> = None;
    let mut infinity_mass = 0.0;
    let mut last_eval: Option<(i64, Eval)> = None;
    for k in (k_bot..=k_top).rev() {
        let y = k as f64 * grid;
        let bound = model.boundary(y, dx, &mut last_eval, x_lo);
        let tails = model.sampling_tails(bound);
        match &prev {
            None => infinity_mass = model.interval_mass(None, &tails),
            Some((_, prev_tails)) => {
                // Bucket k + 1 holds [X(k + 1), X(k)).
                masses[(k + 1 - k_bot) as usize] = model.interval_mass(Some(prev_tails), &tails);
            }
        }
        prev = Some((bound, tails));
    }
    let (_, bottom_tails) = prev.expect("at least one bucket");
    masses[0] = model.upper_mass(&bottom_tails);
    Ok(DiscretePld::from_parts(grid, k_bot, masses, infinity_mass.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Boundary {
    NegInf,
    Grid(i64, f64),
    PosInf,
}

/// Sampling-component CDF and survival at a boundary; the smaller of the
/// two is computed directly.
#[derive(Debug, Clone, Copy)]
struct Tail {
    z: f64,
    cdf: f64,
    sf: f64,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    loss: f64,
    slope: f64,
}

struct LossModel {
    adjacency: Adjacency,
    probs: Vec<f64>,
    /// `-c^2 / (2 sigma^2)`
    offset: Vec<f64>,
    /// `c / sigma^2`
    rate: Vec<f64>,
    /// Sampling distribution: (weight, mean), common scale `sigma`.
    sampling: Vec<(f64, f64)>,
    sigma: f64,
    inf: f64,
    sup: f64,
}

impl LossModel {
    fn new(mog: &MixtureGaussian, adjacency: Adjacency) -> Self {
        let s2 = mog.sigma * mog.sigma;
        let mut probs = Vec::new();
        let mut offset = Vec::new();
        let mut rate = Vec::new();
        let mut zero_mass = 0.0;
        for (&p, &c) in mog.probabilities.iter().zip(&mog.sensitivities) {
            if p <= 0.0 {
                continue;
            }
            if c == 0.0 {
                zero_mass += p;
            }
            probs.push(p);
            offset.push(-c * c / (2.0 * s2));
            rate.push(c / s2);
        }
        let (inf, sup, sampling) = match adjacency {
            Adjacency::Remove => {
                let inf = if zero_mass > 0.0 {
                    libm::log(zero_mass)
                } else {
                    f64::NEG_INFINITY
                };
                let sampling = probs
                    .iter()
                    .zip(&rate)
                    .map(|(&p, &r)| (p, -r * s2))
                    .collect();
                (inf, f64::INFINITY, sampling)
            }
            Adjacency::Add => {
                let sup = if zero_mass > 0.0 {
                    -libm::log(zero_mass)
                } else {
                    f64::INFINITY
                };
                (f64::NEG_INFINITY, sup, vec![(1.0, 0.0)])
            }
        };
        Self {
            adjacency,
            probs,
            offset,
            rate,
            sampling,
            sigma: mog.sigma,
            inf,
            sup,
        }
    }

    fn is_constant(&self) -> bool {
        self.rate.iter().all(|&r| r == 0.0)
    }

    #[inline]
    fn eval(&self, x: f64) -> Eval {
        let sign = match self.adjacency {
            Adjacency::Remove => -1.0,
            Adjacency::Add => 1.0,
        };
        let mut max = f64::NEG_INFINITY;
        for (o, r) in self.offset.iter().zip(&self.rate) {
            let e = o + sign * r * x;
            if e > max {
                max = e;
            }
        }
        let mut total = 0.0;
        let mut weighted_rate = 0.0;
        for ((p, o), r) in self.probs.iter().zip(&self.offset).zip(&self.rate) {
            let t = p * libm::exp(o + sign * r * x - max);
            total += t;
            weighted_rate += t * r;
        }
        let lse = max + libm::log(total);
        let loss = match self.adjacency {
            Adjacency::Remove => lse,
            Adjacency::Add => -lse,
        };
        Eval {
            loss,
            slope: -weighted_rate / total,
        }
    }

    /// Continuous root of `L(x) = y` by bracketed Newton iteration.
    fn solve_continuous(&self, y: f64, start: f64) -> f64 {
        let mut x = start;
        let mut e = self.eval(x);
        let mut step = self.sigma.max(1e-3);
        let (mut lo, mut hi) = if e.loss > y {
            let mut lo = x;
            let mut hi = x + step;
            while self.eval(hi).loss > y {
                lo = hi;
                step *= 2.0;
                hi += step;
            }
            (lo, hi)
        } else {
            let mut hi = x;
            let mut lo = x - step;
            while self.eval(lo).loss <= y {
                hi = lo;
                step *= 2.0;
                lo -= step;
            }
            (lo, hi)
        };
        for _ in 0..200 {
            let newton = if e.slope < 0.0 {
                x - (e.loss - y) / e.slope
            } else {
                f64::NAN
            };
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let moved = (next - x).abs();
            x = next;
            e = self.eval(x);
            if e.loss > y {
                lo = x;
            } else {
                hi = x;
            }
            if moved <= 1e-12 * (1.0 + x.abs()) || hi - lo <= 1e-12 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// Smallest grid index `g` with `L(g * dx) <= y`, starting from `g0`.
    fn grid_search(&self, y: f64, g0: i64, dx: f64) -> (i64, Eval) {
        let at = |g: i64| self.eval(g as f64 * dx);
        let e0 = at(g0);
        let (mut lo, mut hi, mut e_hi);
        if e0.loss <= y {
            hi = g0;
            e_hi = e0;
            let mut step = 1i64;
            loop {
                let g = hi - step;
                let e = at(g);
                if e.loss > y {
                    lo = g;
                    break;
                }
                hi = g;
                e_hi = e;
                step = step.saturating_mul(2);
            }
        } else {
            lo = g0;
            let mut step = 1i64;
            loop {
                let g = lo + step;
                let e = at(g);
                if e.loss <= y {
                    hi = g;
                    e_hi = e;
                    break;
                }
                lo = g;
                step = step.saturating_mul(2);
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let e = at(mid);
            if e.loss <= y {
                hi = mid;
                e_hi = e;
            } else {
                lo = mid;
            }
        }
        (hi, e_hi)
    }

    /// Boundary `x*(y)` for the bucket sweep. `last` carries the previous
    /// grid root so the next one is predicted by a Newton step.
    fn boundary(&self, y: f64, dx: f64, last: &mut Option<(i64, Eval)>, start: f64) -> Boundary {
        if y >= self.sup {
            return Boundary::NegInf;
        }
        if y <= self.inf {
            return Boundary::PosInf;
        }
        let (g, e) = match *last {
            Some((prev, e)) => self.refine(y, dx, prev, e),
            None => {
                let guess = libm::round(self.solve_continuous(y, start) / dx) as i64;
                self.grid_search(y, guess, dx)
            }
        };
        *last = Some((g, e));
        Boundary::Grid(g, g as f64 * dx)
    }

    /// A grid point `g >= prev` with `L(g) <= y`, by Newton steps from the
    /// previous boundary. Any such point is a valid (pessimistic) boundary;
    /// the steps stop once the linearized root is within one grid step to
    /// the left, and fall back to the exact search otherwise.
    fn refine(&self, y: f64, dx: f64, prev: i64, prev_eval: Eval) -> (i64, Eval) {
        let (mut g, mut e) = (prev, prev_eval);
        for _ in 0..4 {
            if !(e.slope < 0.0 && e.slope.is_finite()) {
                break;
            }
            if e.loss <= y && (y - e.loss) <= -e.slope * dx {
                return (g, e);
            }
            let x = g as f64 * dx + (y - e.loss) / e.slope;
            let next = (libm::ceil(x / dx) as i64).max(prev);
            if next == g {
                break;
            }
            g = next;
            e = self.eval(g as f64 * dx);
        }
        if e.loss <= y && g >= prev {
            return (g, e);
        }
        let (g, e) = self.grid_search(y, g, dx);
        if g < prev {
            (prev, prev_eval)
        } else {
            (g, e)
        }
    }

    fn sampling_tails(&self, bound: Boundary) -> Vec<Tail> {
        self.sampling
            .iter()
            .map(|&(_, mean)| match bound {
                Boundary::NegInf => Tail {
                    z: f64::NEG_INFINITY,
                    cdf: 0.0,
                    sf: 1.0,
                },
                Boundary::PosInf => Tail {
                    z: f64::INFINITY,
                    cdf: 1.0,
                    sf: 0.0,
                },
                Boundary::Grid(_, x) => {
                    let z = (x - mean) / self.sigma;
                    if z < 0.0 {
                        let cdf = norm_cdf(z);
                        Tail { z, cdf, sf: 1.0 - cdf }
                    } else {
                        let sf = norm_sf(z);
                        Tail { z, cdf: 1.0 - sf, sf }
                    }
                }
            })
            .collect()
    }

    /// Sampling mass in `[a, b)`; `a = None` means `-inf`.
    fn interval_mass(&self, a: Option<&[Tail]>, b: &[Tail]) -> f64 {
        let mut total = 0.0;
        for (i, &(w, _)) in self.sampling.iter().enumerate() {
            let tb = b[i];
            let piece = match a {
                None => tb.cdf,
                Some(a) => {
                    let ta = a[i];
                    if tb.z <= 0.0 {
                        tb.cdf - ta.cdf
                    } else if ta.z >= 0.0 {
                        ta.sf - tb.sf
                    } else {
                        1.0 - ta.cdf - tb.sf
                    }
                }
            };
            total += w * piece.max(0.0);
        }
        total
    }

    /// Sampling mass in `[b, inf)`.
    fn upper_mass(&self, b: &[Tail]) -> f64 {
        self.sampling
            .iter()
            .zip(b)
            .map(|(&(w, _), t)| w * t.sf)
            .sum()
    }

    fn sampling_cdf(&self, x: f64) -> f64 {
        self.sampling
            .iter()
            .map(|&(w, m)| w * norm_cdf((x - m) / self.sigma))
            .sum()
    }

    fn sampling_sf(&self, x: f64) -> f64 {
        self.sampling
            .iter()
            .map(|&(w, m)| w * norm_sf((x - m) / self.sigma))
            .sum()
    }

    /// A point `x` with sampling CDF at most `tau`, close to that quantile.
    fn sampling_quantile_lower(&self, tau: f64) -> f64 {
        let z = special::norm_ppf(tau);
        let means = self.sampling.iter().map(|s| s.1);
        let mut lo = means.clone().fold(f64::INFINITY, f64::min) + self.sigma * z;
        let mut hi = means.fold(f64::NEG_INFINITY, f64::max) + self.sigma * z;
        for _ in 0..100 {
            if hi - lo <= 1e-9 * (1.0 + lo.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.sampling_cdf(mid) <= tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// A point `x` with sampling survival at most `tau`.
    fn sampling_quantile_upper(&self, tau: f64) -> f64 {
        let z = special::norm_isf(tau);
        let means = self.sampling.iter().map(|s| s.1);
        let mut lo = means.clone().fold(f64::INFINITY, f64::min) + self.sigma * z;
        let mut hi = means.fold(f64::NEG_INFINITY, f64::max) + self.sigma * z;
        for _ in 0..100 {
            if hi - lo <= 1e-9 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.sampling_sf(mid) <= tau {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half() -> MixtureGaussian {
        MixtureGaussian::new(vec![0.5, 0.5], vec![1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn privacy_loss_examples() {
        let zero = MixtureGaussian::gaussian(0.0, 3.0).unwrap();
        assert_eq!(zero.privacy_loss(1.7), 0.0);
        assert_eq!(half_half().privacy_loss(-0.5), 0.0);
        let g = MixtureGaussian::gaussian(1.0, 1.0).unwrap();
        assert_eq!(g.privacy_loss(0.0), -0.5);
    }

    #[test]
    fn add_orientation_mirrors_remove() {
        let m = MixtureGaussian::new(vec![0.2, 0.3, 0.5], vec![0.0, 0.7, 2.0], 1.3).unwrap();
        for &x in &[-3.0, -0.4, 0.0, 0.9, 4.2] {
            let r = m.privacy_loss_for(Adjacency::Remove, -x);
            let a = m.privacy_loss_for(Adjacency::Add, x);
            assert!((a + r).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_cdf_examples() {
        let std = MixtureGaussian::gaussian(0.0, 1.0).unwrap();
        assert_eq!(std.mixture_cdf(0.0), 0.5);
        assert!((std.mixture_cdf(1.959_964) - 0.975).abs() < 1e-6);
        assert!((half_half().mixture_cdf(-0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_privacy_loss_examples() {
        assert_eq!(half_half().inverse_privacy_loss(0.0, 0.25).unwrap(), -0.5);
        let g = MixtureGaussian::gaussian(1.0, 1.0).unwrap();
        assert_eq!(g.inverse_privacy_loss(-0.5, 0.1).unwrap(), 0.0);
        let x = g.inverse_privacy_loss(-0.55, 0.1).unwrap();
        assert!((x - 0.1).abs() < 1e-15);
        assert!(g.privacy_loss(x) <= -0.55);
    }

    #[test]
    fn inverse_out_of_range() {
        // Lower limit ln(0.5) for the half/half mixture.
        assert!(matches!(
            half_half().inverse_privacy_loss(-0.7, 1e-3),
            Err(Error::OutOfRange { .. })
        ));
        assert!(MixtureGaussian::gaussian(0.0, 1.0)
            .unwrap()
            .inverse_privacy_loss(0.0, 1e-3)
            .is_err());
    }

    #[test]
    fn zero_sensitivity_is_point_mass() {
        let cfg = DiscretizationConfig::default();
        let m = MixtureGaussian::gaussian(0.0, 1.0).unwrap();
        for adj in [Adjacency::Remove, Adjacency::Add] {
            let pld = pld_from_mog(&m, &cfg, adj).unwrap();
            assert_eq!(pld, DiscretePld::identity(cfg.pld_grid));
        }
    }

    #[test]
    fn pld_mass_is_conserved() {
        let cfg = DiscretizationConfig::default();
        let m = MixtureGaussian::new(vec![0.6, 0.3, 0.1], vec![0.0, 0.5, 1.5], 0.8).unwrap();
        for adj in [Adjacency::Remove, Adjacency::Add] {
            let pld = pld_from_mog(&m, &cfg, adj).unwrap();
            assert!((pld.total_mass() - 1.0).abs() < 1e-10);
            assert!(pld.infinity_mass() <= 2e-12);
        }
    }

    #[test]
    fn discretize_rounds_up_and_enumerates() {
        let cfg = DiscretizationConfig {
            sensitivity_grid: 0.25,
            ..Default::default()
        };
        let pm = ProductMixture::new(vec![0.5, 0.5], vec![0.3, 0.4], 1.0).unwrap();
        let m = discretize_pmog(&pm, &cfg).unwrap();
        assert_eq!(m.sensitivities(), &[0.0, 0.5, 1.0]);
        assert_eq!(m.probabilities(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn single_column_is_subsampled_gaussian() {
        let cfg = DiscretizationConfig {
            sensitivity_grid: 1.0,
            ..Default::default()
        };
        let pm = ProductMixture::new(vec![0.1], vec![1.0], 2.0).unwrap();
        let m = discretize_pmog(&pm, &cfg).unwrap();
        assert_eq!(m, MixtureGaussian::subsampled_gaussian(0.1, 1.0, 2.0).unwrap());
        let none = ProductMixture::new(vec![0.0, 0.0], vec![1.0, 2.0], 1.0).unwrap();
        let m = discretize_pmog(&none, &cfg).unwrap();
        assert_eq!((m.sensitivities(), m.probabilities()), (&[0.0][..], &[1.0][..]));
    }

    #[test]
    fn binomial_mixtures() {
        let m = mog_from_binomial(0, 0.3, 1.0, 1.0).unwrap();
        assert_eq!(m.sensitivities(), &[0.0]);
        let m = mog_from_binomial(2, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(m.sensitivities(), &[0.0, 1.0, 2.0]);
        for (p, e) in m.probabilities().iter().zip([0.25, 0.5, 0.25]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn hypergeometric_mixture() {
        let m = mog_from_hypergeometric(10, 2, 3, 1.0, 1.0).unwrap();
        // C(2,k) C(8,3-k) / C(10,3): 56/120, 56/120, 8/120
        let expect = [56.0 / 120.0, 56.0 / 120.0, 8.0 / 120.0];
        for (p, e) in m.probabilities().iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
    }

    #[test]
    fn compaction_moves_mass_up() {
        let m = MixtureGaussian::new(vec![0.5, 1e-14, 0.5 - 2e-14, 1e-14], vec![0.0, 1.0, 2.0, 3.0], 1.0).unwrap();
        let c = m.compacted(1e-12);
        assert_eq!(c.sensitivities(), &[0.0, 2.0, 3.0]);
        assert_eq!(c.probabilities()[1], 0.5 - 2e-14 + 1e-14);
    }

    #[test]
    fn invalid_mixtures() {
        assert!(MixtureGaussian::new(vec![0.5], vec![1.0], 1.0).is_err());
        assert!(MixtureGaussian::new(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(MixtureGaussian::new(vec![1.0], vec![1.0], 0.0).is_err());
        assert!(ProductMixture::new(vec![1.5], vec![1.0], 1.0).is_err());
    }
}
