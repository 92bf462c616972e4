use iqswitch::bounds::{
    chernoff_lower, chernoff_upper, growth_envelope, kingman_bound, lindley_step,
    total_queue_bound, GG1Params,
};
use iqswitch::derive_params;
use iqswitch::switch::replication_rng;
use proptest::prelude::*;
use rand::distributions::{Bernoulli, Distribution};

proptest! {
    #[test]
    fn tail_bounds_are_probabilities_and_monotone(mean in 0.01f64..1e4, x in 0.01f64..1e3, dx in 0.0f64..100.0) {
        for f in [chernoff_lower::<f64>, chernoff_upper::<f64>] {
            let a = f(mean, x).unwrap();
            let b = f(mean, x + dx).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a + 1e-12);
        }
        // The upper-tail bound is the weaker of the two at equal deviation.
        prop_assert!(chernoff_upper(mean, x).unwrap() >= chernoff_lower(mean, x).unwrap() - 1e-12);
    }

    #[test]
    fn kingman_is_finite_and_nonnegative(lambda in 0.0f64..0.99, extra_x in 0.0f64..2.0, extra_y in 0.0f64..2.0) {
        let p = GG1Params::new(lambda, lambda * lambda + extra_x, 1.0, 1.0 + extra_y).unwrap();
        let k = kingman_bound(&p).unwrap();
        prop_assert!(k >= 0.0);
        prop_assert!(k.is_finite());
    }

    #[test]
    fn total_queue_bound_is_monotone(n in 1u64..1000, d in 1u64..100_000) {
        prop_assert!(total_queue_bound(n, d) <= total_queue_bound(n + 1, d));
        prop_assert!(total_queue_bound(n, d) <= total_queue_bound(n, d + 1));
        prop_assert_eq!(total_queue_bound(n, d), 3 * n * d);
    }
}

#[test]
fn bound_at_derived_offset() {
    let p = derive_params(25, 25, 31.0, 141.0, 30.0).unwrap();
    assert_eq!(p.d, 56_733);
    assert_eq!(total_queue_bound(25, p.d), 4_254_975);
    assert_eq!(total_queue_bound(25, 56_734), 4_255_050);
}

#[test]
fn envelope_matches_square_root_growth_form() {
    for n in [4u64, 9, 16] {
        let e = growth_envelope(n, 2 * n, 1.0f64);
        let f = 2.0 * n as f64;
        let want = (n as f64).sqrt().powi(3) * f * f.ln();
        assert!((e.value - want).abs() <= 1e-9 * want);
    }
}

#[test]
fn binomial_tails_under_chernoff() {
    let (m, p, samples) = (1000u32, 0.3, 100_000u32);
    let mean = m as f64 * p;
    let dist = Bernoulli::new(p).unwrap();
    let mut rng = replication_rng(99, 0);
    let draws: Vec<u32> = (0..samples)
        .map(|_| (0..m).map(|_| dist.sample(&mut rng) as u32).sum())
        .collect();
    for x in [10.0, 20.0, 30.0] {
        let lower = draws.iter().filter(|&&v| v as f64 <= mean - x).count() as f64 / samples as f64;
        let upper = draws.iter().filter(|&&v| v as f64 >= mean + x).count() as f64 / samples as f64;
        assert!(
            lower <= chernoff_lower(mean, x).unwrap(),
            "x = {x}: {lower}"
        );
        assert!(
            upper <= chernoff_upper(mean, x).unwrap(),
            "x = {x}: {upper}"
        );
    }
}

#[test]
fn lindley_average_under_kingman() {
    // Bernoulli(0.3) arrivals, one departure per slot.
    let p = 0.3;
    let bound = kingman_bound(&GG1Params::new(p, p, 1.0, 1.0).unwrap()).unwrap();
    let dist = Bernoulli::new(p).unwrap();
    let mut rng = replication_rng(3, 0);
    let (mut z, mut sum) = (0u64, 0u64);
    let slots = 1_000_000u64;
    for _ in 0..slots {
        sum += z;
        z = lindley_step(z, dist.sample(&mut rng) as u64, 1);
    }
    assert!((sum as f64 / slots as f64) <= bound);
}
