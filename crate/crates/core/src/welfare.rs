//! Expected social welfare under full, strategic and no communication.
//!
//! With interior dispatch, the allocation is affine in the posterior means
//! and welfare is linear in the true types, so
//! `E[u_R | m] = V(ω̂(m))` where `V` is the planner's optimal value at
//! beliefs ω̂. `V` is quadratic with diagonal curvature
//! `h_n = 1/α_n − 2a/(α_n² G)`, `G = 1 + 2a Σ 1/α_j`, and posterior means of
//! different consumers are independent, hence
//!
//! `E[u_R] = V(E[ω]) + ½ Σ_n h_n Var(ω̂_n)`.
//!
//! No communication has `Var(ω̂_n) = 0`; full communication has
//! `Var(ω̂_n) = Var(ω_n)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decoupling::{aggregator_best_response, check_active_participation, unconstrained_allocation};
use crate::equilibrium::Partition;
use crate::error::{Error, Result};
use crate::population::{Prior, Scenario};
use crate::stats::RunningStats;

/// Largest number of message profiles the enumeration oracle will visit.
pub const MAX_ENUMERATED_PROFILES: usize = 100_000;

/// A consumer's messages in valuation units: the probability of each
/// message and the aggregator's posterior mean after it.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageBins {
    /// Bin edges in valuation units, increasing.
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub posterior_means: Vec<f64>,
}

impl MessageBins {
    pub fn from_omega_edges(prior: &Prior, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPartition("bin edges must be increasing".into()));
        }
        let mut probabilities = Vec::with_capacity(edges.len() - 1);
        let mut posterior_means = Vec::with_capacity(edges.len() - 1);
        for w in edges.windows(2) {
            let q = prior.probability(w[0], w[1]);
            probabilities.push(q);
            // A bin outside the support is never sent; its belief is irrelevant.
            let m = prior.conditional_mean(w[0], w[1]).unwrap_or(0.5 * (w[0] + w[1]));
            posterior_means.push(m);
        }
        Ok(MessageBins {
            edges,
            probabilities,
            posterior_means,
        })
    }

    /// Bins of a type-space partition for a consumer with sensitivity
    /// `alpha` facing price `price` (ω = αθ + p).
    pub fn from_partition(partition: &Partition, prior: &Prior, alpha: f64, price: f64) -> Result<Self> {
        let mut edges = partition.mapped_boundaries(alpha, price);
        let last = edges.len() - 1;
        let tol = 1e-9 * (prior.hi() - prior.lo());
        if (edges[0] - prior.lo()).abs() > tol || (edges[last] - prior.hi()).abs() > tol {
            return Err(Error::InvalidPartition(format!(
                "partition spans [{}, {}] but the valuation support is [{}, {}]",
                edges[0],
                edges[last],
                prior.lo(),
                prior.hi()
            )));
        }
        edges[0] = prior.lo();
        edges[last] = prior.hi();
        MessageBins::from_omega_edges(prior, edges)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn bin_of(&self, omega: f64) -> usize {
        self.edges[1..self.len()].partition_point(|&e| e < omega)
    }

    /// Var(ω̂) around `mean`.
    pub fn belief_variance(&self, mean: f64) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.posterior_means)
            .map(|(q, m)| q * (m - mean).powi(2))
            .sum()
    }
}

/// Planner's optimal expected welfare at beliefs `omega_hat`.
pub fn planner_value(scenario: &Scenario, omega_hat: &[f64]) -> Result<f64> {
    let x = unconstrained_allocation(omega_hat, scenario)?;
    Ok(scenario.social_welfare(omega_hat, &x))
}

fn curvatures(scenario: &Scenario) -> Vec<f64> {
    let a = scenario.cost().a();
    let g = 1.0 + 2.0 * a * scenario.consumers().iter().map(|c| 1.0 / c.alpha()).sum::<f64>();
    scenario
        .consumers()
        .iter()
        .map(|c| 1.0 / c.alpha() - 2.0 * a / (c.alpha() * c.alpha() * g))
        .collect()
}

fn value_with_belief_variances(scenario: &Scenario, variances: impl Iterator<Item = f64>) -> Result<f64> {
    let base = planner_value(scenario, &scenario.prior_means())?;
    let gain: f64 = curvatures(scenario).iter().zip(variances).map(|(h, v)| h * v).sum();
    Ok(base + 0.5 * gain)
}

/// Expected welfare when the aggregator observes every type.
pub fn welfare_fc(scenario: &Scenario) -> Result<f64> {
    value_with_belief_variances(scenario, scenario.consumers().iter().map(|c| c.prior().variance()))
}

/// Expected welfare when the aggregator dispatches on priors alone.
pub fn welfare_nc(scenario: &Scenario) -> Result<f64> {
    planner_value(scenario, &scenario.prior_means())
}

/// Message bins for every consumer from type-space partitions at the
/// scenario's price.
pub fn message_bins(scenario: &Scenario, partitions: &[Partition]) -> Result<Vec<MessageBins>> {
    if partitions.len() != scenario.len() {
        return Err(Error::LengthMismatch {
            expected: scenario.len(),
            actual: partitions.len(),
        });
    }
    let price = scenario.price()?;
    scenario
        .consumers()
        .iter()
        .zip(partitions)
        .map(|(c, p)| MessageBins::from_partition(p, c.prior(), c.alpha(), price))
        .collect()
}

/// Exact expected welfare under strategic communication.
pub fn welfare_sit(scenario: &Scenario, partitions: &[Partition]) -> Result<f64> {
    welfare_sit_bins(scenario, &message_bins(scenario, partitions)?)
}

pub fn welfare_sit_bins(scenario: &Scenario, bins: &[MessageBins]) -> Result<f64> {
    check_bins(scenario, bins)?;
    let means = scenario.prior_means();
    value_with_belief_variances(scenario, bins.iter().zip(&means).map(|(b, &m)| b.belief_variance(m)))
}

fn check_bins(scenario: &Scenario, bins: &[MessageBins]) -> Result<()> {
    if bins.len() != scenario.len() {
        return Err(Error::LengthMismatch {
            expected: scenario.len(),
            actual: bins.len(),
        });
    }
    Ok(())
}

/// Exact expected welfare by visiting every message profile.
pub fn welfare_sit_enumerate(scenario: &Scenario, bins: &[MessageBins]) -> Result<f64> {
    check_bins(scenario, bins)?;
    let profiles = bins
        .iter()
        .try_fold(1usize, |acc, b| acc.checked_mul(b.len()))
        .filter(|&p| p <= MAX_ENUMERATED_PROFILES)
        .ok_or_else(|| {
            Error::invalid(
                "partitions",
                format!("more than {MAX_ENUMERATED_PROFILES} message profiles to enumerate"),
            )
        })?;
    let mut index = vec![0usize; bins.len()];
    let mut beliefs: Vec<f64> = bins.iter().map(|b| b.posterior_means[0]).collect();
    let mut total = 0.0;
    for _ in 0..profiles {
        let prob: f64 = bins.iter().zip(&index).map(|(b, &i)| b.probabilities[i]).product();
        if prob > 0.0 {
            total += prob * planner_value(scenario, &beliefs)?;
        }
        // Odometer increment.
        for (n, b) in bins.iter().enumerate() {
            index[n] += 1;
            if index[n] < b.len() {
                beliefs[n] = b.posterior_means[index[n]];
                break;
            }
            index[n] = 0;
            beliefs[n] = b.posterior_means[0];
        }
    }
    Ok(total)
}

/// What the aggregator learns before dispatching.
#[derive(Debug, Clone, Copy)]
pub enum Information<'a> {
    Full,
    None,
    Messages(&'a [MessageBins]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DispatchRule {
    /// Affine first-order allocation (exact under active participation).
    Unconstrained,
    /// Non-negative allocation by active-set removal.
    Clipped,
}

const MC_BATCH: usize = 4096;

/// Seeded Monte Carlo estimate of expected welfare; returns
/// `(mean, standard error)`. Batches draw from independent ChaCha streams
/// of the same seed, so the result does not depend on the thread count.
pub fn simulate_welfare(
    scenario: &Scenario,
    information: Information<'_>,
    rule: DispatchRule,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    if let Information::Messages(bins) = information {
        check_bins(scenario, bins)?;
    }
    let means = scenario.prior_means();
    let batches = samples.div_ceil(MC_BATCH);
    let sums = (0..batches)
        .into_par_iter()
        .map(|batch| -> Result<RunningStats> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let n = MC_BATCH.min(samples - batch * MC_BATCH);
            let mut omega = vec![0.0; scenario.len()];
            let mut beliefs = means.clone();
            let mut stats = RunningStats::default();
            for _ in 0..n {
                for (w, c) in omega.iter_mut().zip(scenario.consumers()) {
                    *w = c.prior().sample(&mut rng);
                }
                match information {
                    Information::Full => beliefs.copy_from_slice(&omega),
                    Information::None => {}
                    Information::Messages(bins) => {
                        for ((belief, b), &w) in beliefs.iter_mut().zip(bins).zip(&omega) {
                            *belief = b.posterior_means[b.bin_of(w)];
                        }
                    }
                }
                let x = match rule {
                    DispatchRule::Unconstrained => unconstrained_allocation(&beliefs, scenario)?,
                    DispatchRule::Clipped => aggregator_best_response(&beliefs, scenario)?.allocations,
                };
                stats.push(scenario.social_welfare(&omega, &x));
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = sums.into_iter().fold(RunningStats::default(), RunningStats::merge);
    Ok(stats.mean_and_stderr())
}

/// Monte Carlo oracle for [`welfare_sit`].
pub fn welfare_sit_mc(scenario: &Scenario, partitions: &[Partition], samples: usize, seed: u64) -> Result<(f64, f64)> {
    let bins = message_bins(scenario, partitions)?;
    simulate_welfare(scenario, Information::Messages(&bins), DispatchRule::Unconstrained, samples, seed)
}

/// Share of the full-information welfare gain realized by communication,
/// in percent.
pub fn recovered_welfare(u_sit: f64, u_fc: f64, u_nc: f64) -> Result<f64> {
    if !(u_fc > u_nc) {
        return Err(Error::DegenerateBenchmarkGap { u_fc, u_nc });
    }
    let rw = 100.0 * (u_sit - u_nc) / (u_fc - u_nc);
    if !(-0.1..=100.1).contains(&rw) {
        return Err(Error::InconsistentRecoveredWelfare(rw));
    }
    Ok(rw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WelfareMethod {
    MomentExact,
    BinEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            samples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub u_sit: f64,
    pub u_fc: f64,
    pub u_nc: f64,
    pub recovered_pct: f64,
    pub method: WelfareMethod,
    /// Standard error of `u_sit` for Monte Carlo estimates.
    pub mc_stderr: Option<f64>,
    pub mc_samples: Option<usize>,
    pub mc_seed: Option<u64>,
    /// Active participation failed; values come from clipped dispatch.
    pub approximate: bool,
}

/// Welfare under all three information regimes for the given partitions.
///
/// When active participation cannot be certified, all three values are
/// simulated with clipped dispatch and flagged approximate.
pub fn welfare_report(
    scenario: &Scenario,
    partitions: &[Partition],
    method: WelfareMethod,
    mc: MonteCarloSettings,
) -> Result<WelfareReport> {
    let bins = message_bins(scenario, partitions)?;
    if !check_active_participation(scenario).holds {
        let sim = |info| simulate_welfare(scenario, info, DispatchRule::Clipped, mc.samples, mc.seed);
        let (u_sit, se) = sim(Information::Messages(&bins))?;
        let (u_fc, _) = sim(Information::Full)?;
        let (u_nc, _) = sim(Information::None)?;
        // Common random numbers keep the ratio stable but not provably in range.
        let recovered_pct = 100.0 * (u_sit - u_nc) / (u_fc - u_nc);
        return Ok(WelfareReport {
            u_sit,
            u_fc,
            u_nc,
            recovered_pct,
            method: WelfareMethod::MonteCarlo,
            mc_stderr: Some(se),
            mc_samples: Some(mc.samples),
            mc_seed: Some(mc.seed),
            approximate: true,
        });
    }
    let u_fc = welfare_fc(scenario)?;
    let u_nc = welfare_nc(scenario)?;
    let (u_sit, mc_stderr) = match method {
        WelfareMethod::MomentExact => (welfare_sit_bins(scenario, &bins)?, None),
        WelfareMethod::BinEnumeration => (welfare_sit_enumerate(scenario, &bins)?, None),
        WelfareMethod::MonteCarlo => {
            let (u, se) = simulate_welfare(
                scenario,
                Information::Messages(&bins),
                DispatchRule::Unconstrained,
                mc.samples,
                mc.seed,
            )?;
            (u, Some(se))
        }
    };
    let is_mc = method == WelfareMethod::MonteCarlo;
    Ok(WelfareReport {
        u_sit,
        u_fc,
        u_nc,
        recovered_pct: recovered_welfare(u_sit, u_fc, u_nc)?,
        method,
        mc_stderr,
        mc_samples: is_mc.then_some(mc.samples),
        mc_seed: is_mc.then_some(mc.seed),
        approximate: false,
    })
}
