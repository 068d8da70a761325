//! Engine values against the independent reference computations.

use mmacc_core::matrices::{prefix_opt, EncoderMatrix};
use mmacc_core::mog::{discretize_pmog, pld_from_mog, Adjacency, MixtureGaussian, ProductMixture};
use mmacc_core::tail_bounds::{binomial_tail_count, s_upper_bound};
use mmacc_core::{analytic, DiscretizationConfig, SensitivityPmf};
use mmacc_oracle::{
    binomial_upper_tail, brute_force_pmog, exact_min_s, gaussian_delta, hockey_stick_monte_carlo,
    hockey_stick_numeric, hockey_stick_numeric_add, prefix_opt_first_column_norm_sq,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mog(rng: &mut impl Rng) -> MixtureGaussian {
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|p| p / total).collect();
    let sens = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    MixtureGaussian::new(probs, sens, rng.random_range(0.5..5.0)).unwrap()
}

#[test]
fn quadrature_brackets_the_engine() {
    let cfg = DiscretizationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mog = random_mog(&mut rng);
        let remove = pld_from_mog(&mog, &cfg, Adjacency::Remove).unwrap();
        let add = pld_from_mog(&mog, &cfg, Adjacency::Add).unwrap();
        for eps in [0.0, 0.3, 1.0] {
            let want = hockey_stick_numeric(&mog, eps);
            let got = remove.delta_for_epsilon(eps);
            assert!(got >= want - 1e-10 && got <= want + 1e-4, "remove eps={eps}: {got} vs {want}");
            let want = hockey_stick_numeric_add(&mog, eps);
            let got = add.delta_for_epsilon(eps);
            assert!(got >= want - 1e-10 && got <= want + 1e-4, "add eps={eps}: {got} vs {want}");
        }
    }
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let mog = MixtureGaussian::new(vec![0.6, 0.3, 0.1], vec![0.0, 1.0, 2.5], 1.2).unwrap();
    for eps in [0.0, 0.5] {
        let exact = hockey_stick_numeric(&mog, eps);
        let (mean, stderr) = hockey_stick_monte_carlo(&mog, eps, 400_000, 11);
        assert!((mean - exact).abs() <= 5.0 * stderr + 1e-6, "{mean} +- {stderr} vs {exact}");
    }
}

#[test]
fn analytic_gaussian_matches_statrs() {
    for (s, sigma, eps) in [(1.0, 1.0, 0.0), (1.0, 2.0, 0.5), (3.0, 1.5, 2.0), (0.2, 4.0, 0.01)] {
        let a = analytic::gaussian_delta(s, sigma, eps);
        let b = gaussian_delta(s, sigma, eps);
        assert!((a - b).abs() <= 1e-12 + 1e-9 * b, "{a} vs {b}");
    }
}

#[test]
fn lattice_product_mixtures_are_exact() {
    let grid = 0.125;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let k = rng.random_range(1..=12);
        let probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let sens: Vec<f64> = (0..k).map(|_| rng.random_range(0..16) as f64 * grid).collect();
        let pm = ProductMixture::new(probs, sens, 1.0).unwrap();
        let pmf = SensitivityPmf::from_product(&pm, grid).unwrap();
        let brute = brute_force_pmog(&pm).unwrap();
        assert_eq!(pmf.atoms().len(), brute.len());
        for (&(m, gp), (&s, &p)) in pmf.atoms().iter().zip(brute.sensitivities().iter().zip(brute.probabilities())) {
            assert_eq!(m as f64 * grid, s);
            assert!((gp - p).abs() <= 1e-12);
        }
    }
}

#[test]
fn rounded_product_mixtures_are_pessimistic() {
    let cfg = DiscretizationConfig {
        sensitivity_grid: 0.3,
        ..DiscretizationConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..8 {
        let k = rng.random_range(1..=8);
        let probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let sens: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let pm = ProductMixture::new(probs, sens, 2.0).unwrap();
        let rounded = pld_from_mog(&discretize_pmog(&pm, &cfg).unwrap(), &cfg, Adjacency::Remove).unwrap();
        let exact = brute_force_pmog(&pm).unwrap();
        for eps in [0.0, 0.25, 1.0] {
            let want = hockey_stick_numeric(&exact, eps);
            assert!(rounded.delta_for_epsilon(eps) >= want - 1e-9);
        }
    }
}

fn random_lower_triangular(rng: &mut impl Rng, n: usize) -> EncoderMatrix {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            if i == j || rng.random_bool(0.5) {
                entries[i * n + j] = rng.random_range(0.1..1.0);
            }
        }
    }
    EncoderMatrix::new(n, n, entries).unwrap()
}

#[test]
fn tail_sum_bound_covers_the_exact_quantile() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..6 {
        let c = random_lower_triangular(&mut rng, 8);
        for p in [0.25, 0.5] {
            for budget in [1e-3, 0.05] {
                for i in 1..8 {
                    for j in 0..i {
                        let upper = s_upper_bound(&c, i, j, p, budget);
                        let exact = exact_min_s(&c, i, j, p, budget).unwrap();
                        assert!(upper >= exact - 1e-12, "({i}, {j}): {upper} < {exact}");
                    }
                }
            }
        }
    }
}

#[test]
fn binomial_tail_count_matches_direct_sum() {
    for (n, p, b) in [(5u64, 0.5, 0.05), (40, 0.1, 1e-6), (200, 0.02, 1e-9)] {
        let t = binomial_tail_count(n, p, b);
        assert!(binomial_upper_tail(n, p, t) <= b);
        if t > 0 {
            assert!(binomial_upper_tail(n, p, t - 1) > b * (1.0 - 1e-9));
        }
    }
}

#[test]
fn prefix_opt_column_norm_matches_closed_form() {
    for n in [1, 2, 8, 64, 200] {
        let c = prefix_opt(n).unwrap();
        let want = prefix_opt_first_column_norm_sq(n).sqrt();
        assert!((c.column_norm(0) - want).abs() <= 1e-12 * want, "n={n}");
    }
}
