//! Scalar special functions on top of `libm`.

use alloc::vec::Vec;

pub const SQRT_2: f64 = core::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function, `1 - norm_cdf(x)` without cancellation.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / SQRT_2PI
}

/// Standard normal quantile.
///
/// Rational approximation (Acklam) followed by two Halley steps against
/// `erfc`; relative error is at the level of the CDF evaluation itself.
pub fn norm_ppf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -norm_ppf_lower(1.0 - p);
    }
    norm_ppf_lower(p)
}

/// Upper quantile: the `x` with `norm_sf(x) = q`. Accurate for tiny `q`.
pub fn norm_isf(q: f64) -> f64 {
    -norm_ppf(q)
}

fn norm_ppf_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let mut x = if p < 0.024_25 {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = norm_cdf(x) - p;
        let u = e * SQRT_2PI * libm::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// `ln(sum(exp(v)))` over the slice; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// `ln C(n, k) + k ln p + (n - k) ln(1 - p)`.
pub fn log_binomial_pmf(trials: u64, k: u64, prob: f64) -> f64 {
    if k > trials {
        return f64::NEG_INFINITY;
    }
    if prob <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if prob >= 1.0 {
        return if k == trials { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = trials as f64;
    let kf = k as f64;
    libm::lgamma(n + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(n - kf + 1.0)
        + kf * libm::log(prob)
        + (n - kf) * libm::log1p(-prob)
}

/// Binomial PMF on `0..=trials`, evaluated in log space.
pub fn binomial_pmf(trials: u64, prob: f64) -> Vec<f64> {
    (0..=trials)
        .map(|k| libm::exp(log_binomial_pmf(trials, k, prob)))
        .collect()
}

/// `ceil(x / grid)` as the smallest integer `k` with `k * grid >= x` in
/// floating point, so `k * grid` never undershoots `x`.
pub fn ceil_to_grid(x: f64, grid: f64) -> i64 {
    let mut k = libm::ceil(x / grid) as i64;
    while (k as f64) * grid < x {
        k += 1;
    }
    while ((k - 1) as f64) * grid >= x {
        k -= 1;
    }
    k
}

/// Largest integer `k` with `k * grid <= x` in floating point.
pub fn floor_to_grid(x: f64, grid: f64) -> i64 {
    let mut k = libm::floor(x / grid) as i64;
    while (k as f64) * grid > x {
        k -= 1;
    }
    while ((k + 1) as f64) * grid <= x {
        k += 1;
    }
    k
}
