//! The six reproducible experiments. Each writes one CSV plus a manifest
//! that embeds the scenario and the full configuration, so a run can be
//! replayed from its manifest alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use drtalk_core::canonical::{expected_bias, outward_price_band};
use drtalk_core::decoupling::effective_cost;
use drtalk_core::pricing::expected_marginal_cost_mc;
use drtalk_core::welfare::{MessageBins, MonteCarloSettings};
use drtalk_core::{
    asymptotic_price, brd_solve, check_active_participation, classify_regime, effective_subgame, kappa_max,
    optimal_price, per_consumer_optimal_price, recovered_welfare, system_kappa_max, welfare_fc, welfare_nc,
    welfare_report, welfare_sit, BrdConfig, ConsumerSpec, CostParams, KappaMax, Partition, PopulationLimit,
    RegimeReport, Scenario, WelfareMethod, WelfareReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{DrtalkError, Result};
use crate::scenario_file::ScenarioFile;

/// `n` consumers cycling through `types` in order.
pub fn cycled_population(types: &[ConsumerSpec], cost: CostParams, n: usize, price: Option<f64>) -> Result<Scenario> {
    let consumers = (0..n).map(|i| types[i % types.len()]).collect();
    Ok(Scenario::new(consumers, cost, price)?)
}

/// For each consumer, the index of the first consumer with the same
/// specification. Identical consumers play identical subgames.
fn representative_of(s: &Scenario) -> Vec<usize> {
    let c = s.consumers();
    (0..c.len())
        .map(|n| (0..=n).find(|&j| c[j] == c[n]).unwrap_or(n))
        .collect()
}

fn representatives(s: &Scenario) -> Vec<usize> {
    representative_of(s)
        .iter()
        .enumerate()
        .filter(|(n, r)| n == *r)
        .map(|(n, _)| n)
        .collect()
}

/// Expand per-representative values to every consumer.
fn expand<T: Clone>(s: &Scenario, reps: &[usize], values: &[T]) -> Vec<T> {
    representative_of(s)
        .iter()
        .map(|r| values[reps.iter().position(|x| x == r).expect("representative")].clone())
        .collect()
}

/// Regime report for every distinct consumer at the scenario price, in
/// the order of [`representatives`].
fn regimes(s: &Scenario, brd: &BrdConfig, cap: usize) -> Result<(Vec<usize>, Vec<RegimeReport>)> {
    let reps = representatives(s);
    let reports = reps
        .iter()
        .map(|&n| Ok(classify_regime(&effective_subgame(s, n)?, brd, cap)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((reps, reports))
}

/// Largest message count, at most `cap`, that every consumer supports.
pub fn common_kappa(s: &Scenario, brd: &BrdConfig, cap: usize) -> Result<usize> {
    let values = representatives(s)
        .iter()
        .map(|&n| Ok(kappa_max(effective_subgame(s, n)?.game(), brd, cap)?.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(system_kappa_max(values).capped(cap))
}

/// Every consumer's `kappa`-bin equilibrium at the scenario price.
pub fn common_partitions(s: &Scenario, kappa: usize, brd: &BrdConfig) -> Result<Vec<Partition>> {
    let reps = representatives(s);
    let parts = reps
        .iter()
        .map(|&n| {
            let sub = effective_subgame(s, n)?;
            let p = brd_solve(sub.game(), kappa, brd)?;
            if !p.is_valid(brd.min_gap_for(sub.game())) {
                return Err(DrtalkError::Model(drtalk_core::Error::InvalidPartition(format!(
                    "consumer {n} has no valid {kappa}-bin equilibrium at price {}",
                    sub.price
                ))));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(expand(s, &reps, &parts))
}

/// Welfare with a common message count for all consumers.
pub fn welfare_with_kappa(s: &Scenario, kappa: usize, brd: &BrdConfig, mc: MonteCarloSettings) -> Result<WelfareReport> {
    Ok(welfare_report(s, &common_partitions(s, kappa, brd)?, WelfareMethod::MomentExact, mc)?)
}

fn mc_settings(config: &ExperimentConfig) -> MonteCarloSettings {
    MonteCarloSettings {
        samples: config.mc_samples,
        seed: config.seed,
    }
}

fn participation_warning(s: &Scenario, price: f64) -> Option<String> {
    let report = check_active_participation(s);
    (!report.holds).then(|| {
        format!(
            "active participation cannot be certified at price {price}: consumer {} can be dispatched {:.6} kWh; \
             welfare falls back to clipped dispatch",
            report.worst_consumer, report.worst_margin
        )
    })
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRun {
    pub n_consumers: usize,
    /// Index of the consumer type within the scenario file.
    pub consumer_type: usize,
    pub price: f64,
    pub gamma: f64,
    pub partition: Partition,
}

/// BRD traces at p* for every population size and distinct consumer type.
pub fn convergence_runs(
    types: &[ConsumerSpec],
    cost: CostParams,
    populations: &[usize],
    kappa: usize,
    brd: &BrdConfig,
) -> Result<Vec<ConvergenceRun>> {
    let per_n = populations
        .par_iter()
        .map(|&n| {
            let base = cycled_population(types, cost, n, None)?;
            let price = optimal_price(&base);
            let s = base.with_price(price)?;
            (0..n.min(types.len()))
                .map(|t| {
                    let sub = effective_subgame(&s, t)?;
                    Ok(ConvergenceRun {
                        n_consumers: n,
                        consumer_type: t,
                        price,
                        gamma: sub.gamma(),
                        partition: brd_solve(sub.game(), kappa, brd)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

#[derive(Debug, Serialize)]
struct ConvergenceRow {
    n_consumers: usize,
    consumer_type: usize,
    iteration: usize,
    boundary_change: f64,
}

// ---------------------------------------------------------------- price sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricePoint {
    pub price: f64,
    /// Consumer index of each distinct consumer type.
    pub consumers: Vec<usize>,
    pub regimes: Vec<RegimeReport>,
    pub expected_bias: Vec<f64>,
    pub system_kappa_max: KappaMax,
    /// Common message count used for welfare, `min(system κ_max, kappa)`.
    pub kappa_used: usize,
    pub welfare: WelfareReport,
}

pub fn price_sweep(base: &Scenario, prices: &[f64], config: &ExperimentConfig) -> Result<Vec<PricePoint>> {
    let brd = config.brd();
    prices
        .par_iter()
        .map(|&price| {
            let s = base.with_price(price)?;
            let (consumers, regimes) = regimes(&s, &brd, config.kappa_search_cap)?;
            let expected_bias = consumers
                .iter()
                .map(|&n| Ok(expected_bias(effective_subgame(&s, n)?.game())))
                .collect::<Result<Vec<_>>>()?;
            let system = system_kappa_max(regimes.iter().map(|r| r.kappa_max));
            let kappa_used = system.capped(config.kappa);
            let welfare = welfare_with_kappa(&s, kappa_used, &brd, mc_settings(config))?;
            Ok(PricePoint {
                price,
                consumers,
                regimes,
                expected_bias,
                system_kappa_max: system,
                kappa_used,
                welfare,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct PriceSweepRow {
    price_usd_per_kwh: f64,
    consumer: usize,
    regime: &'static str,
    kappa_max: String,
    kappa_at_cap: bool,
    expected_bias_kwh: f64,
    agreement_omega_usd_per_kwh: f64,
    band_lo_usd_per_kwh: f64,
    band_hi_usd_per_kwh: f64,
    system_kappa_max: String,
    kappa_used: usize,
    recovered_welfare_pct: f64,
    welfare_approximate: bool,
}

// ---------------------------------------------------------------- kappa sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaPoint {
    /// `optimal` at p*, `offset` at p* + offset.
    pub label: &'static str,
    pub price: f64,
    pub kappa: usize,
    pub system_kappa_max: KappaMax,
    pub welfare: WelfareReport,
}

/// Welfare for κ = 1, …, min(kappa, system κ_max) at p* and p* + offset.
pub fn kappa_sweep(base: &Scenario, config: &ExperimentConfig) -> Result<Vec<KappaPoint>> {
    let brd = config.brd();
    let p_star = optimal_price(base);
    let prices = [("optimal", p_star), ("offset", p_star + config.price_offset)];
    let mut jobs = Vec::new();
    for (label, price) in prices {
        let s = base.with_price(price)?;
        let (_, reports) = regimes(&s, &brd, config.kappa_search_cap)?;
        let system = system_kappa_max(reports.iter().map(|r| r.kappa_max));
        for kappa in 1..=system.capped(config.kappa) {
            jobs.push((label, price, kappa, system));
        }
    }
    jobs.into_par_iter()
        .map(|(label, price, kappa, system_kappa_max)| {
            let s = base.with_price(price)?;
            Ok(KappaPoint {
                label,
                price,
                kappa,
                system_kappa_max,
                welfare: welfare_with_kappa(&s, kappa, &brd, mc_settings(config))?,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct KappaSweepRow {
    price_label: &'static str,
    price_usd_per_kwh: f64,
    kappa: usize,
    system_kappa_max: String,
    u_sit_usd: f64,
    u_fc_usd: f64,
    u_nc_usd: f64,
    recovered_welfare_pct: f64,
    method: String,
    approximate: bool,
}

// ---------------------------------------------------------------- scaling

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n_consumers: usize,
    pub a: f64,
    pub p_star_n: f64,
    pub p_star_inf: f64,
    /// |p*_N − p*_∞| / p*_∞.
    pub relative_gap: f64,
    pub kappa_at_p_star_n: usize,
    pub rw_at_p_star_n: f64,
    pub kappa_at_p_star_inf: usize,
    pub rw_at_p_star_inf: f64,
    /// Whether the vertex check certifies active participation at p*_N.
    pub active_participation: bool,
}

/// Price of the large-population limit of equal shares of `types`.
pub fn mixture_limit_price(types: &[ConsumerSpec]) -> Result<f64> {
    Ok(asymptotic_price(&PopulationLimit::from_mixture(types.iter().map(|c| (c, 1.0)))?))
}

/// Recovered welfare with a common message count and unconstrained
/// dispatch. Returns `(kappa, rw)`.
fn unconstrained_rw(s: &Scenario, brd: &BrdConfig, cap: usize) -> Result<(usize, f64)> {
    let kappa = common_kappa(s, brd, cap)?;
    let parts = common_partitions(s, kappa, brd)?;
    let rw = recovered_welfare(welfare_sit(s, &parts)?, welfare_fc(s)?, welfare_nc(s)?)?;
    Ok((kappa, rw))
}

/// The large-population analysis assumes every consumer stays active, so
/// welfare here always uses unconstrained dispatch; the participation
/// flag records where that assumption is not certified.
pub fn scaling(types: &[ConsumerSpec], cost: CostParams, config: &ExperimentConfig) -> Result<Vec<ScalingPoint>> {
    let brd = config.brd();
    let p_star_inf = mixture_limit_price(types)?;
    let jobs: Vec<(f64, usize)> = config
        .curvatures
        .iter()
        .flat_map(|&a| config.populations.iter().map(move |&n| (a, n)))
        .collect();
    jobs.into_par_iter()
        .map(|(a, n)| {
            let cost = CostParams::new(a, cost.b(), cost.c())?;
            let base = cycled_population(types, cost, n, None)?;
            let p_star_n = optimal_price(&base);
            let at_n = base.with_price(p_star_n)?;
            let at_inf = base.with_price(p_star_inf)?;
            let (kappa_at_p_star_n, rw_at_p_star_n) = unconstrained_rw(&at_n, &brd, config.kappa)?;
            let (kappa_at_p_star_inf, rw_at_p_star_inf) = unconstrained_rw(&at_inf, &brd, config.kappa)?;
            Ok(ScalingPoint {
                n_consumers: n,
                a,
                p_star_n,
                p_star_inf,
                relative_gap: (p_star_n - p_star_inf).abs() / p_star_inf,
                kappa_at_p_star_n,
                rw_at_p_star_n,
                kappa_at_p_star_inf,
                rw_at_p_star_inf,
                active_participation: check_active_participation(&at_n).holds,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- price

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceRow {
    pub consumer: usize,
    pub p_star_n_usd_per_kwh: f64,
    pub p_star_usd_per_kwh: f64,
    pub a_eff_usd_per_kwh2: f64,
    pub b_eff_usd_per_kwh: f64,
    pub gamma: f64,
    pub delta_kwh: f64,
    pub band_lo_usd_per_kwh: f64,
    pub band_hi_usd_per_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSummary {
    pub p_star: f64,
    /// Limit price of a large population with equal shares of these consumers.
    pub p_star_inf: f64,
    pub max_per_consumer_deviation: f64,
    pub marginal_cost_mc: f64,
    pub marginal_cost_stderr: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

pub fn price_report(s: &Scenario, config: &ExperimentConfig) -> Result<(Vec<PriceRow>, PriceSummary)> {
    let p_star = optimal_price(s);
    let at = s.with_price(p_star)?;
    let rows = (0..s.len())
        .map(|n| {
            let sub = effective_subgame(&at, n)?;
            let (a_eff, b_eff) = effective_cost(s, n)?;
            let band = outward_price_band(&sub);
            Ok(PriceRow {
                consumer: n,
                p_star_n_usd_per_kwh: per_consumer_optimal_price(s, n)?,
                p_star_usd_per_kwh: p_star,
                a_eff_usd_per_kwh2: a_eff,
                b_eff_usd_per_kwh: b_eff,
                gamma: sub.gamma(),
                delta_kwh: sub.delta(),
                band_lo_usd_per_kwh: band.0,
                band_hi_usd_per_kwh: band.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mc, se) = expected_marginal_cost_mc(s, config.mc_samples, config.seed)?;
    let summary = PriceSummary {
        p_star,
        p_star_inf: mixture_limit_price(s.consumers())?,
        max_per_consumer_deviation: rows
            .iter()
            .map(|r| (r.p_star_n_usd_per_kwh - p_star).abs())
            .fold(0.0, f64::max),
        marginal_cost_mc: mc,
        marginal_cost_stderr: se,
        mc_samples: config.mc_samples,
        seed: config.seed,
    };
    Ok((rows, summary))
}

// ---------------------------------------------------------------- equilibrium

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub consumer: usize,
    pub price_usd_per_kwh: f64,
    pub regime: &'static str,
    pub kappa_max: String,
    pub kappa: usize,
    pub bin: usize,
    pub theta_lo_kwh: f64,
    pub theta_hi_kwh: f64,
    pub omega_lo_usd_per_kwh: f64,
    pub omega_hi_usd_per_kwh: f64,
    pub action_kwh: f64,
    pub probability: f64,
    pub posterior_mean_usd_per_kwh: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Each consumer's most informative partition with at most `kappa` bins.
pub fn equilibrium_dump(s: &Scenario, config: &ExperimentConfig) -> Result<Vec<EquilibriumRow>> {
    let brd = config.brd();
    let price = s.price()?;
    let mut rows = Vec::new();
    for n in 0..s.len() {
        let sub = effective_subgame(s, n)?;
        let report = classify_regime(&sub, &brd, config.kappa_search_cap)?;
        let kappa = report.kappa_max.capped(config.kappa);
        let part = brd_solve(sub.game(), kappa, &brd)?;
        let c = s.consumers()[n];
        let bins = MessageBins::from_partition(&part, c.prior(), c.alpha(), price)?;
        for bin in 0..kappa {
            rows.push(EquilibriumRow {
                consumer: n,
                price_usd_per_kwh: price,
                regime: report.regime.as_str(),
                kappa_max: report.kappa_max.to_string(),
                kappa,
                bin,
                theta_lo_kwh: part.boundaries[bin],
                theta_hi_kwh: part.boundaries[bin + 1],
                omega_lo_usd_per_kwh: bins.edges[bin],
                omega_hi_usd_per_kwh: bins.edges[bin + 1],
                action_kwh: part.actions[bin],
                probability: bins.probabilities[bin],
                posterior_mean_usd_per_kwh: bins.posterior_means[bin],
                converged: part.converged,
                iterations: part.iterations,
                residual: part.residual,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- running

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub scenario: ScenarioFile,
    pub output_file: PathBuf,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// `<out>.manifest.json` next to the CSV.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| DrtalkError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| DrtalkError::io(path, e))?;
    Ok(())
}

/// Load the scenario named in the configuration and run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let file = ScenarioFile::load(&config.scenario_path)?;
    run_with_scenario(config, &file)
}

/// Re-run a manifest, writing the CSV to `output`.
pub fn replay(manifest_path: &Path, output: &Path) -> Result<RunOutput> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| DrtalkError::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| DrtalkError::validation(manifest_path.display().to_string(), e.to_string()))?;
    manifest.scenario.validate()?;
    let mut config = manifest.config;
    config.output_path = output.to_path_buf();
    run_with_scenario(&config, &manifest.scenario)
}

pub fn run_with_scenario(config: &ExperimentConfig, file: &ScenarioFile) -> Result<RunOutput> {
    config.validate()?;
    let scenario = file.to_scenario()?;
    let brd = config.brd();
    let out = &config.output_path;
    let mut warnings = Vec::new();

    let summary = match config.experiment {
        Experiment::Convergence => {
            let runs = convergence_runs(&file.consumer_types()?, file.cost_params()?, &config.populations, config.kappa, &brd)?;
            for r in runs.iter().filter(|r| !r.partition.converged) {
                warnings.push(format!(
                    "N={} type {}: BRD stopped after {} iterations without converging{}",
                    r.n_consumers,
                    r.consumer_type,
                    r.partition.iterations,
                    if r.partition.collapsed { " (boundaries collapsed)" } else { "" }
                ));
            }
            write_csv(
                out,
                runs.iter().flat_map(|r| {
                    r.partition.history.iter().enumerate().map(|(i, &d)| ConvergenceRow {
                        n_consumers: r.n_consumers,
                        consumer_type: r.consumer_type,
                        iteration: i + 1,
                        boundary_change: d,
                    })
                }),
            )?;
            serde_json::json!(runs
                .iter()
                .map(|r| serde_json::json!({
                    "n_consumers": r.n_consumers,
                    "consumer_type": r.consumer_type,
                    "price": r.price,
                    "gamma": r.gamma,
                    "iterations": r.partition.iterations,
                    "converged": r.partition.converged,
                }))
                .collect::<Vec<_>>())
        }
        Experiment::PriceSweep => {
            let grid = match config.grid {
                Some(g) => g,
                None => {
                    let p = optimal_price(&scenario);
                    crate::config::Grid::new((p - 1.0).max(0.0), p + 1.0, 201)?
                }
            };
            let points = price_sweep(&scenario, &grid.values(), config)?;
            let approximate = points.iter().filter(|p| p.welfare.approximate).count();
            if approximate > 0 {
                warnings.push(format!(
                    "{approximate} grid prices lack certified active participation; their welfare uses clipped dispatch"
                ));
            }
            write_csv(
                out,
                points.iter().flat_map(|p| {
                    p.consumers.iter().zip(&p.regimes).zip(&p.expected_bias).map(move |((&n, r), &eb)| {
                        PriceSweepRow {
                            price_usd_per_kwh: p.price,
                            consumer: n,
                            regime: r.regime.as_str(),
                            kappa_max: r.kappa_max.to_string(),
                            kappa_at_cap: r.kappa_at_cap,
                            expected_bias_kwh: eb,
                            agreement_omega_usd_per_kwh: r.agreement_omega,
                            band_lo_usd_per_kwh: r.price_band.0,
                            band_hi_usd_per_kwh: r.price_band.1,
                            system_kappa_max: p.system_kappa_max.to_string(),
                            kappa_used: p.kappa_used,
                            recovered_welfare_pct: p.welfare.recovered_pct,
                            welfare_approximate: p.welfare.approximate,
                        }
                    })
                }),
            )?;
            serde_json::json!({
                "grid": grid,
                "p_star": optimal_price(&scenario),
            })
        }
        Experiment::KappaSweep => {
            let p_star = optimal_price(&scenario);
            for price in [p_star, p_star + config.price_offset] {
                warnings.extend(participation_warning(&scenario.with_price(price)?, price));
            }
            let points = kappa_sweep(&scenario, config)?;
            write_csv(
                out,
                points.iter().map(|p| KappaSweepRow {
                    price_label: p.label,
                    price_usd_per_kwh: p.price,
                    kappa: p.kappa,
                    system_kappa_max: p.system_kappa_max.to_string(),
                    u_sit_usd: p.welfare.u_sit,
                    u_fc_usd: p.welfare.u_fc,
                    u_nc_usd: p.welfare.u_nc,
                    recovered_welfare_pct: p.welfare.recovered_pct,
                    method: format!("{:?}", p.welfare.method),
                    approximate: p.welfare.approximate,
                }),
            )?;
            let kappa_max_at = |label: &str| {
                points
                    .iter()
                    .find(|p| p.label == label)
                    .map(|p| p.system_kappa_max.to_string())
            };
            serde_json::json!({
                "p_star": p_star,
                "offset_price": p_star + config.price_offset,
                "system_kappa_max_optimal": kappa_max_at("optimal"),
                "system_kappa_max_offset": kappa_max_at("offset"),
            })
        }
        Experiment::Scaling => {
            let types = file.consumer_types()?;
            let points = scaling(&types, file.cost_params()?, config)?;
            for &a in &config.curvatures {
                if let Some(p) = points.iter().find(|p| p.a == a && !p.active_participation) {
                    warnings.push(format!(
                        "a={a}: active participation is not certified from N={} on; welfare uses unconstrained dispatch",
                        p.n_consumers
                    ));
                }
            }
            write_csv(out, &points)?;
            serde_json::json!({ "p_star_inf": mixture_limit_price(&types)? })
        }
        Experiment::Price => {
            let (rows, summary) = price_report(&scenario, config)?;
            warnings.extend(participation_warning(&scenario.with_price(summary.p_star)?, summary.p_star));
            write_csv(out, &rows)?;
            serde_json::to_value(&summary)?
        }
        Experiment::Equilibrium => {
            let price = scenario.announced_price().unwrap_or_else(|| optimal_price(&scenario));
            let s = scenario.with_price(price)?;
            warnings.extend(participation_warning(&s, price));
            let rows = equilibrium_dump(&s, config)?;
            write_csv(out, &rows)?;
            serde_json::json!({ "price": price, "price_is_optimal": scenario.announced_price().is_none() })
        }
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment,
        seed: config.seed,
        config: config.clone(),
        scenario: file.clone(),
        output_file: out.clone(),
        warnings,
        summary,
    };
    let manifest_path = manifest_path_for(out);
    let f = File::create(&manifest_path).map_err(|e| DrtalkError::io(&manifest_path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n").map_err(|e| DrtalkError::io(&manifest_path, e))?;
    w.flush().map_err(|e| DrtalkError::io(&manifest_path, e))?;
    Ok(RunOutput {
        csv_path: out.clone(),
        manifest_path,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use drtalk_core::Prior;

    fn types() -> Vec<ConsumerSpec> {
        vec![
            ConsumerSpec::new(Prior::uniform(10.0, 11.0).unwrap(), 0.3).unwrap(),
            ConsumerSpec::new(Prior::uniform(12.0, 13.0).unwrap(), 0.35).unwrap(),
        ]
    }

    #[test]
    fn cycling_and_representatives() {
        let s = cycled_population(&types(), CostParams::new(0.1, 9.0, 0.0).unwrap(), 5, None).unwrap();
        assert_eq!(s.consumers()[4], types()[0]);
        assert_eq!(representatives(&s), vec![0, 1]);
        assert_eq!(representative_of(&s), vec![0, 1, 0, 1, 0]);
        assert_eq!(expand(&s, &[0, 1], &['a', 'b']), vec!['a', 'b', 'a', 'b', 'a']);
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(manifest_path_for(Path::new("out/x.csv")), PathBuf::from("out/x.csv.manifest.json"));
    }
}
