use mmacc_core::mog::{discretize_pmog, mog_from_binomial, pld_from_mog, Adjacency, MixtureGaussian, ProductMixture};
use mmacc_core::{DiscretizationConfig, SensitivityPmf};
use proptest::prelude::*;

fn cfg() -> DiscretizationConfig {
    DiscretizationConfig {
        pld_grid: 1e-3,
        sensitivity_grid: 1e-3,
        inverse_tolerance: 1e-5,
        tail_truncation_mass: 1e-12,
    }
}

fn arb_mog() -> impl Strategy<Value = MixtureGaussian> {
    (prop::collection::vec((0.01f64..1.0, 0.0f64..3.0), 1..5), 0.5f64..5.0).prop_map(|(parts, sigma)| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let probs = parts.iter().map(|p| p.0 / total).collect();
        let sens = parts.iter().map(|p| p.1).collect();
        MixtureGaussian::new(probs, sens, sigma).unwrap()
    })
}

const ORIENTATIONS: [Adjacency; 2] = [Adjacency::Remove, Adjacency::Add];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn privacy_loss_is_non_increasing(mog in arb_mog(), xs in prop::collection::vec(-30.0f64..30.0, 1000)) {
        let mut xs = xs;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for adj in ORIENTATIONS {
            let mut prev = f64::INFINITY;
            for &x in &xs {
                let l = mog.privacy_loss_for(adj, x);
                prop_assert!(l <= prev + 1e-12 * prev.abs().max(1.0), "{adj:?}: L rose at {x}");
                prev = l;
            }
        }
    }

    #[test]
    fn inverse_privacy_loss_contract(mog in arb_mog(), t in 0.05f64..0.95, grid_exp in 2i32..7) {
        let grid = 10f64.powi(-grid_exp);
        let lo = mog.privacy_loss(40.0 * mog.sigma());
        let hi = mog.privacy_loss(-40.0 * mog.sigma());
        prop_assume!(hi - lo > 1e-6);
        let y = lo + t * (hi - lo);
        let x = mog.inverse_privacy_loss(y, grid).unwrap();
        let k = (x / grid).round();
        prop_assert!((x - k * grid).abs() <= 1e-9 * x.abs().max(1.0));
        prop_assert!(mog.privacy_loss(x) <= y);
        prop_assert!(y < mog.privacy_loss(x - grid));
    }

    #[test]
    fn larger_sensitivities_dominate(mog in arb_mog(), bumps in prop::collection::vec(0.0f64..1.0, 4)) {
        let bigger: Vec<f64> = mog.sensitivities().iter().zip(&bumps).map(|(c, b)| c + b).collect();
        let other = MixtureGaussian::new(mog.probabilities().to_vec(), bigger, mog.sigma()).unwrap();
        for adj in ORIENTATIONS {
            let small = pld_from_mog(&mog, &cfg(), adj).unwrap();
            let large = pld_from_mog(&other, &cfg(), adj).unwrap();
            for eps in [0.0, 0.25, 0.5, 1.0, 2.0] {
                prop_assert!(large.delta_for_epsilon(eps) >= small.delta_for_epsilon(eps) - 1e-9);
            }
        }
    }

    #[test]
    fn pld_masses_are_a_distribution(mog in arb_mog()) {
        for adj in ORIENTATIONS {
            let pld = pld_from_mog(&mog, &cfg(), adj).unwrap();
            let total = pld.masses().iter().sum::<f64>() + pld.infinity_mass();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(pld.masses().iter().all(|m| *m >= 0.0));
        }
    }

    #[test]
    fn sensitivity_pmf_sums_to_one(ps in prop::collection::vec((0.0f64..1.0, 0.0f64..2.0), 1..14)) {
        let pm = ProductMixture::new(
            ps.iter().map(|p| p.0).collect(),
            ps.iter().map(|p| p.1).collect(),
            1.0,
        ).unwrap();
        let pmf = SensitivityPmf::from_product(&pm, 1e-2).unwrap();
        prop_assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
        let mean: f64 = pmf.atoms().iter().map(|(k, m)| *k as f64 * 1e-2 * m).sum();
        let exact: f64 = ps.iter().map(|(p, c)| p * c).sum();
        // Rounding up moves each sensitivity by less than one grid step.
        prop_assert!(mean >= exact - 1e-9);
        prop_assert!(mean <= exact + 1e-2 * ps.len() as f64 + 1e-9);
    }
}

#[test]
fn binomial_mixture_matches_pmf() {
    let mog = mog_from_binomial(4, 0.5, 2.0, 1.0).unwrap();
    assert_eq!(mog.sensitivities(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
    let expect = [1.0, 4.0, 6.0, 4.0, 1.0].map(|x| x / 16.0);
    for (p, e) in mog.probabilities().iter().zip(expect) {
        assert!((p - e).abs() < 1e-14);
    }
}

#[test]
fn product_mixture_with_equal_columns_is_binomial() {
    let pm = ProductMixture::new(vec![0.3; 6], vec![0.5; 6], 2.0).unwrap();
    let mog = discretize_pmog(&pm, &cfg()).unwrap();
    let reference = mog_from_binomial(6, 0.3, 0.5, 2.0).unwrap();
    for (a, b) in mog.probabilities().iter().zip(reference.probabilities()) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in mog.sensitivities().iter().zip(reference.sensitivities()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn certain_sensitivity_is_plain_gaussian() {
    let gauss = MixtureGaussian::gaussian(1.0, 1.0).unwrap();
    let pld = pld_from_mog(&gauss, &cfg(), Adjacency::Remove).unwrap();
    let exact = mmacc_core::analytic::gaussian_delta(1.0, 1.0, 1.0);
    let engine = pld.delta_for_epsilon(1.0);
    assert!(engine >= exact - 1e-12);
    assert!(engine <= exact + 1e-3, "{engine} vs {exact}");
}
