use mmacc_core::matrices::{binary_tree, identity, prefix_opt, EncoderMatrix};
use mmacc_core::tail_bounds::{binomial_tail_count, conditional_probability, probability_tail_bounds};
use proptest::prelude::*;

fn first_nonzero(c: &EncoderMatrix, j: usize) -> Option<usize> {
    (0..c.rows()).find(|&i| c.get(i, j) != 0.0)
}

#[test]
fn column_heads_keep_the_base_probability() {
    for c in [binary_tree(16).unwrap(), prefix_opt(10).unwrap()] {
        let t = probability_tail_bounds(&c, 0.1, 3.0, 1e-6).unwrap();
        for j in 0..c.cols() {
            let head = first_nonzero(&c, j).unwrap();
            assert_eq!(t.get(head, j), 0.1);
            for i in 0..c.rows() {
                if c.get(i, j) == 0.0 {
                    assert_eq!(t.get(i, j), 1.0);
                } else {
                    assert!(t.get(i, j) >= 0.1);
                }
            }
        }
    }
}

#[test]
fn identity_table_is_trivial() {
    let t = probability_tail_bounds(&identity(8).unwrap(), 0.2, 1.0, 1e-6).unwrap();
    assert!(t.is_trivial());
    assert_eq!(t.events(), 0);
    assert!(t.normal_quantile().is_none());
}

#[test]
fn bounds_shrink_with_noise() {
    let c = binary_tree(32).unwrap();
    let tables: Vec<_> = [5.0, 10.0, 20.0, 1e6]
        .iter()
        .map(|&s| probability_tail_bounds(&c, 1.0 / 32.0, s, 5e-7).unwrap())
        .collect();
    for pair in tables.windows(2) {
        for (a, b) in pair[0].values().iter().zip(pair[1].values()) {
            assert!(b <= a, "{b} > {a}");
        }
    }
    let top = tables[3].values().iter().cloned().filter(|v| *v < 1.0).fold(0.0, f64::max);
    assert!(top * 32.0 <= 1.01);
}

#[test]
fn bounds_grow_with_sampling() {
    let c = prefix_opt(8).unwrap();
    let a = probability_tail_bounds(&c, 0.05, 4.0, 1e-6).unwrap();
    let b = probability_tail_bounds(&c, 0.1, 4.0, 1e-6).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(y >= x);
    }
}

#[test]
fn binomial_tail_examples() {
    assert_eq!(binomial_tail_count(5, 0.5, 0.05), 4);
    assert_eq!(binomial_tail_count(10, 0.0, 1e-9), 0);
    assert_eq!(binomial_tail_count(10, 1.0, 1e-9), 10);
    assert_eq!(binomial_tail_count(0, 0.3, 1e-9), 0);
}

proptest! {
    #[test]
    fn binomial_tail_is_the_smallest_valid_count(n in 1u64..60, p in 0.01f64..0.99, budget in 1e-9f64..0.5) {
        let t = binomial_tail_count(n, p, budget);
        let upper = |t: u64| -> f64 {
            (t + 1..=n).map(|k| {
                let ln = libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0)
                    - libm::lgamma((n - k) as f64 + 1.0) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
                ln.exp()
            }).sum()
        };
        prop_assert!(upper(t) <= budget * (1.0 + 1e-9));
        if t > 0 {
            prop_assert!(upper(t - 1) > budget * (1.0 - 1e-6));
        }
    }

    #[test]
    fn conditional_probability_is_monotone(p in 0.001f64..0.999, e1 in 0.0f64..5.0, e2 in 0.0f64..5.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = conditional_probability(p, lo);
        let b = conditional_probability(p, hi);
        prop_assert!(a <= b);
        prop_assert!(a >= p && b <= 1.0);
        prop_assert!((conditional_probability(p, 0.0) - p).abs() <= 1e-15);
    }
}
