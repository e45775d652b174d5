//! Bias-minimizing tariffs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decoupling::{effective_cost, unconstrained_allocation};
use crate::error::{Error, Result};
use crate::population::Scenario;
use crate::stats::RunningStats;

/// Price that sets consumer n's expected bias to zero.
pub fn per_consumer_optimal_price(scenario: &Scenario, n: usize) -> Result<f64> {
    let consumer = scenario.consumer(n)?;
    let (a_eff, b_eff) = effective_cost(scenario, n)?;
    let alpha = consumer.alpha();
    Ok((alpha * b_eff + 2.0 * a_eff * consumer.prior().mean()) / (alpha + 2.0 * a_eff))
}

/// The uniform tariff that is simultaneously bias-minimizing for every
/// consumer.
pub fn optimal_price(scenario: &Scenario) -> f64 {
    let a = scenario.cost().a();
    let (mut weighted, mut inv) = (0.0, 0.0);
    for c in scenario.consumers() {
        weighted += c.prior().mean() / c.alpha();
        inv += 1.0 / c.alpha();
    }
    (scenario.cost().b() + 2.0 * a * weighted) / (1.0 + 2.0 * a * inv)
}

/// Population-level statistics for the large-N limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationLimit {
    pub mean_omega_over_alpha: f64,
    pub mean_inv_alpha: f64,
    /// Valuations and sensitivities are independent across the population;
    /// `mean_omega` then carries E[ω].
    pub independent: bool,
    pub mean_omega: Option<f64>,
}

impl PopulationLimit {
    pub fn new(mean_omega_over_alpha: f64, mean_inv_alpha: f64) -> Result<Self> {
        if !(mean_inv_alpha.is_finite() && mean_inv_alpha > 0.0) {
            return Err(Error::invalid("mean_inv_alpha", format!("must be positive, got {mean_inv_alpha}")));
        }
        Ok(PopulationLimit {
            mean_omega_over_alpha,
            mean_inv_alpha,
            independent: false,
            mean_omega: None,
        })
    }

    /// Limit for independent ω and α with the given marginal means.
    pub fn independent(mean_omega: f64, mean_inv_alpha: f64) -> Result<Self> {
        let mut limit = PopulationLimit::new(mean_omega * mean_inv_alpha, mean_inv_alpha)?;
        limit.independent = true;
        limit.mean_omega = Some(mean_omega);
        Ok(limit)
    }

    /// Weighted mixture of consumer types; weights need not be normalized.
    pub fn from_mixture<'a>(groups: impl IntoIterator<Item = (&'a crate::population::ConsumerSpec, f64)>) -> Result<Self> {
        let (mut w_sum, mut oa, mut ia) = (0.0, 0.0, 0.0);
        for (c, w) in groups {
            if !(w >= 0.0) {
                return Err(Error::invalid("weight", "mixture weights must be non-negative"));
            }
            w_sum += w;
            oa += w * c.prior().mean() / c.alpha();
            ia += w / c.alpha();
        }
        if !(w_sum > 0.0) {
            return Err(Error::invalid("weight", "mixture needs positive total weight"));
        }
        PopulationLimit::new(oa / w_sum, ia / w_sum)
    }
}

/// Price that removes the bias in the limit of a large population.
pub fn asymptotic_price(limit: &PopulationLimit) -> f64 {
    match (limit.independent, limit.mean_omega) {
        (true, Some(mean_omega)) => mean_omega,
        _ => limit.mean_omega_over_alpha / limit.mean_inv_alpha,
    }
}

/// Monte Carlo estimate of E[C'(X*)] where X* is the full-information
/// optimal load; returns `(mean, standard error)`.
pub fn expected_marginal_cost_mc(scenario: &Scenario, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    const BATCH: usize = 4096;
    let batches = samples.div_ceil(BATCH);
    let cost = *scenario.cost();
    let sums = (0..batches)
        .into_par_iter()
        .map(|batch| -> Result<RunningStats> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let n = BATCH.min(samples - batch * BATCH);
            let mut omega = vec![0.0; scenario.len()];
            let mut stats = RunningStats::default();
            for _ in 0..n {
                for (w, c) in omega.iter_mut().zip(scenario.consumers()) {
                    *w = c.prior().sample(&mut rng);
                }
                let load: f64 = unconstrained_allocation(&omega, scenario)?.iter().sum();
                stats.push(cost.marginal_cost(load));
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = sums.into_iter().fold(RunningStats::default(), RunningStats::merge);
    Ok(stats.mean_and_stderr())
}
