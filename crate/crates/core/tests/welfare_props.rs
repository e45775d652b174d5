mod common;

use common::table1;
use drtalk_core::welfare::{
    simulate_welfare, welfare_sit_bins, welfare_sit_enumerate, DispatchRule, Information, MessageBins,
};
use drtalk_core::{
    brd_solve, effective_subgame, optimal_price, recovered_welfare, welfare_fc, welfare_nc, welfare_sit,
    welfare_sit_mc, BrdConfig, ConsumerSpec, CostParams, Partition, Prior, Scenario,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn partitions(s: &Scenario, kappa: usize) -> Vec<Partition> {
    (0..s.len())
        .map(|n| brd_solve(effective_subgame(s, n).unwrap().game(), kappa, &BrdConfig::default()).unwrap())
        .collect()
}

fn at_optimal_price(s: Scenario) -> Scenario {
    let p = optimal_price(&s);
    s.with_price(p).unwrap()
}

fn random_scenario(rng: &mut ChaCha8Rng, n: usize) -> Scenario {
    let consumers = (0..n)
        .map(|_| {
            let lo = 10.0 + 5.0 * rng.random::<f64>();
            let w = 0.5 + 1.5 * rng.random::<f64>();
            let prior = if rng.random::<bool>() {
                Prior::uniform(lo, lo + w).unwrap()
            } else {
                Prior::truncated_normal(lo + w * rng.random::<f64>(), 0.5 * w, lo, lo + w).unwrap()
            };
            ConsumerSpec::new(prior, 0.2 + 0.4 * rng.random::<f64>()).unwrap()
        })
        .collect();
    let cost = CostParams::new(0.02 + 0.1 * rng.random::<f64>(), 5.0 + 3.0 * rng.random::<f64>(), 0.0).unwrap();
    at_optimal_price(Scenario::new(consumers, cost, None).unwrap())
}

#[test]
fn welfare_is_ordered_and_monotone_in_kappa() {
    let s = at_optimal_price(table1(None));
    let (fc, nc) = (welfare_fc(&s).unwrap(), welfare_nc(&s).unwrap());
    let tol = 1e-9 * fc.abs();
    let mut prev = nc - tol;
    for kappa in 1..=12 {
        let u = welfare_sit(&s, &partitions(&s, kappa)).unwrap();
        assert!(nc - tol <= u && u <= fc + tol, "kappa={kappa}");
        assert!(u >= prev - tol, "kappa={kappa}");
        prev = u;
    }
    assert!((welfare_sit(&s, &partitions(&s, 1)).unwrap() - nc).abs() <= tol);
}

#[test]
fn exact_methods_agree_with_each_other_and_with_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let n = 2 + (rng.random::<u32>() % 2) as usize;
        let s = random_scenario(&mut rng, n);
        let bins = drtalk_core::welfare::message_bins(&s, &partitions(&s, 2)).unwrap();
        let moments = welfare_sit_bins(&s, &bins).unwrap();
        let enumerated = welfare_sit_enumerate(&s, &bins).unwrap();
        assert!((moments - enumerated).abs() <= 1e-10 * moments.abs().max(1.0));
        let (mc, se) =
            simulate_welfare(&s, Information::Messages(&bins), DispatchRule::Unconstrained, 400_000, 8).unwrap();
        assert!((mc - moments).abs() <= 3.0 * se, "{mc} ± {se} vs {moments}");
    }
}

#[test]
fn benchmarks_match_simulation() {
    let s = at_optimal_price(table1(None));
    let (fc, se_fc) = simulate_welfare(&s, Information::Full, DispatchRule::Unconstrained, 1_000_000, 1).unwrap();
    let (nc, se_nc) = simulate_welfare(&s, Information::None, DispatchRule::Unconstrained, 1_000_000, 1).unwrap();
    assert!((fc - welfare_fc(&s).unwrap()).abs() <= 3.0 * se_fc);
    assert!((nc - welfare_nc(&s).unwrap()).abs() <= 3.0 * se_nc);
    let parts = partitions(&s, 3);
    let (sit, se) = welfare_sit_mc(&s, &parts, 1_000_000, 2).unwrap();
    assert!((sit - welfare_sit(&s, &parts).unwrap()).abs() <= 3.0 * se);
}

#[test]
fn payments_cancel_when_messages_are_fixed() {
    let s = at_optimal_price(table1(None));
    let bins = drtalk_core::welfare::message_bins(&s, &partitions(&s, 4)).unwrap();
    let base = (welfare_fc(&s).unwrap(), welfare_nc(&s).unwrap(), welfare_sit_bins(&s, &bins).unwrap());
    for p in [0.0, 5.0, 9.5, 12.0] {
        let moved = s.with_price(p).unwrap();
        assert_eq!(welfare_fc(&moved).unwrap(), base.0);
        assert_eq!(welfare_nc(&moved).unwrap(), base.1);
        assert_eq!(welfare_sit_bins(&moved, &bins).unwrap(), base.2);
    }
}

#[test]
fn fixed_cost_shifts_all_benchmarks() {
    let s = at_optimal_price(table1(None));
    let parts = partitions(&s, 3);
    let shifted = s.with_cost(CostParams::new(s.cost().a(), s.cost().b(), 4.25).unwrap());
    let before = (welfare_fc(&s).unwrap(), welfare_nc(&s).unwrap(), welfare_sit(&s, &parts).unwrap());
    let after = (
        welfare_fc(&shifted).unwrap(),
        welfare_nc(&shifted).unwrap(),
        welfare_sit(&shifted, &parts).unwrap(),
    );
    assert!((after.0 - before.0 + 4.25).abs() < 1e-10);
    assert!((after.1 - before.1 + 4.25).abs() < 1e-10);
    assert!((after.2 - before.2 + 4.25).abs() < 1e-10);
    let rw = |t: (f64, f64, f64)| recovered_welfare(t.2, t.0, t.1).unwrap();
    assert!((rw(before) - rw(after)).abs() < 1e-8);
}

#[test]
fn recovered_welfare_endpoints() {
    assert_eq!(recovered_welfare(1.0, 2.0, 1.0).unwrap(), 0.0);
    assert_eq!(recovered_welfare(2.0, 2.0, 1.0).unwrap(), 100.0);
    assert!(recovered_welfare(1.0, 1.0, 1.0).is_err());
    assert!(recovered_welfare(3.0, 2.0, 1.0).is_err());
}

#[test]
fn bins_with_fixed_edges_ignore_price() {
    let c = ConsumerSpec::new(Prior::uniform(2.0, 4.0).unwrap(), 1.0).unwrap();
    let bins = MessageBins::from_omega_edges(c.prior(), vec![2.0, 3.0, 4.0]).unwrap();
    assert_eq!(bins.posterior_means, vec![2.5, 3.5]);
    assert_eq!(bins.probabilities, vec![0.5, 0.5]);
    assert!((bins.belief_variance(3.0) - 0.25).abs() < 1e-15);
}
