use std::path::PathBuf;
use std::str::FromStr;

use drtalk_core::BrdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{DrtalkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// BRD iteration traces across population sizes.
    Convergence,
    /// Regime, κ_max, expected bias and recovered welfare over a price grid.
    PriceSweep,
    /// Recovered welfare against the message count at p* and at an offset price.
    KappaSweep,
    /// Finite-population price against its large-population limit.
    Scaling,
    /// p*, per-consumer prices and the marginal-cost cross-check.
    Price,
    /// Partition dump at the announced price (or p*).
    Equilibrium,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::PriceSweep => "price_sweep",
            Experiment::KappaSweep => "kappa_sweep",
            Experiment::Scaling => "scaling",
            Experiment::Price => "price",
            Experiment::Equilibrium => "equilibrium",
        }
    }
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let grid = Grid { lo, hi, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(DrtalkError::validation("grid", format!("need lo <= hi, got {}:{}", self.lo, self.hi)));
        }
        if self.points == 0 || (self.points == 1 && self.lo != self.hi) {
            return Err(DrtalkError::validation("grid", "need at least two points for a non-degenerate range"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = DrtalkError;

    /// `lo:hi:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || DrtalkError::validation("grid", format!("expected lo:hi:n, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        Grid::new(
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        )
    }
}

/// Population sizes: `a,b,c`, `lo:hi` or `lo:hi:step`.
pub fn parse_populations(s: &str) -> Result<Vec<usize>> {
    let bad = || DrtalkError::validation("populations", format!("expected a list or lo:hi[:step], got {s:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let values: Vec<usize> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (num(lo)?, num(hi)?, 1),
            [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
            _ => return Err(bad()),
        };
        if step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

pub fn parse_list(name: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DrtalkError::validation(name, format!("not a number: {t:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scenario_path: PathBuf,
    pub output_path: PathBuf,
    pub seed: u64,
    pub mc_samples: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Message count for convergence and equilibrium runs; upper limit on
    /// the message count everywhere else.
    pub kappa: usize,
    /// Largest κ tried when searching for κ_max.
    pub kappa_search_cap: usize,
    /// Price grid for the sweep; `None` means p* ± 1 in 201 points.
    pub grid: Option<Grid>,
    /// Population sizes; consumer types from the scenario are cycled.
    pub populations: Vec<usize>,
    /// Cost curvatures `a` for the scaling experiment.
    pub curvatures: Vec<f64>,
    /// Offset from p* of the suboptimal price in the κ sweep.
    pub price_offset: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, scenario_path: impl Into<PathBuf>, output_path: impl Into<PathBuf>) -> Self {
        let mut config = ExperimentConfig {
            experiment,
            scenario_path: scenario_path.into(),
            output_path: output_path.into(),
            seed: 0,
            mc_samples: 200_000,
            epsilon: 1e-10,
            max_iterations: 10_000,
            kappa: 10,
            kappa_search_cap: 64,
            grid: None,
            populations: vec![1],
            curvatures: vec![0.05, 0.3],
            price_offset: 0.11,
        };
        match experiment {
            Experiment::Convergence => {
                config.kappa = 20;
                config.epsilon = 1e-4;
                config.populations = (1..=40).collect();
            }
            Experiment::KappaSweep => config.kappa = 20,
            Experiment::Scaling => config.populations = (3..=300).step_by(3).collect(),
            Experiment::Price => config.mc_samples = 1_000_000,
            Experiment::PriceSweep | Experiment::Equilibrium => {}
        }
        config
    }

    pub fn brd(&self) -> BrdConfig {
        BrdConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            min_gap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(DrtalkError::validation("eps", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(DrtalkError::validation("max_iterations", "must be at least 1"));
        }
        if self.kappa == 0 || self.kappa_search_cap == 0 {
            return Err(DrtalkError::validation("kappa", "must be at least 1"));
        }
        if self.mc_samples == 0 {
            return Err(DrtalkError::validation("mc_samples", "must be at least 1"));
        }
        if let Some(grid) = &self.grid {
            grid.validate()?;
        }
        if self.populations.is_empty() || self.populations.contains(&0) {
            return Err(DrtalkError::validation("populations", "need at least one positive population size"));
        }
        if self.curvatures.is_empty() || self.curvatures.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(DrtalkError::validation("curvatures", "need at least one positive curvature"));
        }
        if !self.price_offset.is_finite() {
            return Err(DrtalkError::validation("offset", "must be finite"));
        }
        Ok(())
    }
}
