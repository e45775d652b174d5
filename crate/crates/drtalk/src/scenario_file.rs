//! JSON scenario files. Every numeric field carries its unit in its name.
//!
//! ```json
//! {
//!   "name": "table1",
//!   "cost": { "a_usd_per_kwh2": 0.051, "b_usd_per_kwh": 7.89, "c_usd": 0.0 },
//!   "price_usd_per_kwh": null,
//!   "consumers": [
//!     { "label": "group-2", "count": 1, "alpha_usd_per_kwh2": 0.35,
//!       "prior": { "kind": "uniform",
//!                  "params": { "lo_usd_per_kwh": 12.0, "hi_usd_per_kwh": 13.0 } } }
//!   ]
//! }
//! ```

use std::path::Path;

use drtalk_core::{ConsumerSpec, CostParams, Prior, PriorKind, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::{DrtalkError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub cost: CostEntry,
    #[serde(default)]
    pub price_usd_per_kwh: Option<f64>,
    pub consumers: Vec<ConsumerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub a_usd_per_kwh2: f64,
    pub b_usd_per_kwh: f64,
    #[serde(default)]
    pub c_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Number of identical consumers this entry stands for.
    #[serde(default = "one")]
    pub count: usize,
    pub alpha_usd_per_kwh2: f64,
    pub prior: PriorEntry,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorEntry {
    Uniform {
        lo_usd_per_kwh: f64,
        hi_usd_per_kwh: f64,
    },
    TruncatedNormal {
        mu_usd_per_kwh: f64,
        sigma_usd_per_kwh: f64,
        lo_usd_per_kwh: f64,
        hi_usd_per_kwh: f64,
    },
}

impl PriorEntry {
    fn to_prior(self) -> drtalk_core::Result<Prior> {
        match self {
            PriorEntry::Uniform {
                lo_usd_per_kwh,
                hi_usd_per_kwh,
            } => Prior::uniform(lo_usd_per_kwh, hi_usd_per_kwh),
            PriorEntry::TruncatedNormal {
                mu_usd_per_kwh,
                sigma_usd_per_kwh,
                lo_usd_per_kwh,
                hi_usd_per_kwh,
            } => Prior::truncated_normal(mu_usd_per_kwh, sigma_usd_per_kwh, lo_usd_per_kwh, hi_usd_per_kwh),
        }
    }

    fn from_prior(prior: &Prior) -> Self {
        match prior.kind() {
            PriorKind::Uniform { lo, hi } => PriorEntry::Uniform {
                lo_usd_per_kwh: lo,
                hi_usd_per_kwh: hi,
            },
            PriorKind::TruncatedNormal { mu, sigma, lo, hi } => PriorEntry::TruncatedNormal {
                mu_usd_per_kwh: mu,
                sigma_usd_per_kwh: sigma,
                lo_usd_per_kwh: lo,
                hi_usd_per_kwh: hi,
            },
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            DrtalkError::validation(
                if path == "." { "scenario".to_string() } else { path },
                format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            )
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DrtalkError::io(path, e))?;
        ScenarioFile::parse(&text).map_err(|e| match e {
            DrtalkError::Validation { context, message } => {
                DrtalkError::validation(format!("{}: {context}", path.display()), message)
            }
            other => other,
        })
    }

    /// Checks every field against the model's domain and names the first
    /// offending one.
    pub fn validate(&self) -> Result<()> {
        if self.consumers.is_empty() {
            return Err(DrtalkError::validation("consumers", "must list at least one consumer"));
        }
        let c = &self.cost;
        CostParams::new(c.a_usd_per_kwh2, c.b_usd_per_kwh, c.c_usd)
            .map_err(|e| DrtalkError::validation("cost", e.to_string()))?;
        if let Some(p) = self.price_usd_per_kwh {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DrtalkError::validation("price_usd_per_kwh", format!("must be non-negative, got {p}")));
            }
        }
        for (i, entry) in self.consumers.iter().enumerate() {
            if entry.count == 0 {
                return Err(DrtalkError::validation(format!("consumers[{i}].count"), "must be at least 1"));
            }
            let prior = entry
                .prior
                .to_prior()
                .map_err(|e| DrtalkError::validation(format!("consumers[{i}].prior"), e.to_string()))?;
            ConsumerSpec::new(prior, entry.alpha_usd_per_kwh2)
                .map_err(|e| DrtalkError::validation(format!("consumers[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Distinct consumer types in file order, each expanded `count` times
    /// by [`ScenarioFile::to_scenario`].
    pub fn consumer_types(&self) -> Result<Vec<ConsumerSpec>> {
        self.consumers
            .iter()
            .map(|e| Ok(ConsumerSpec::new(e.prior.to_prior()?, e.alpha_usd_per_kwh2)?))
            .collect()
    }

    pub fn cost_params(&self) -> Result<CostParams> {
        Ok(CostParams::new(self.cost.a_usd_per_kwh2, self.cost.b_usd_per_kwh, self.cost.c_usd)?)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let types = self.consumer_types()?;
        let consumers = self
            .consumers
            .iter()
            .zip(types)
            .flat_map(|(e, c)| std::iter::repeat_n(c, e.count))
            .collect();
        Ok(Scenario::new(consumers, self.cost_params()?, self.price_usd_per_kwh)?)
    }

    pub fn from_scenario(scenario: &Scenario, name: Option<String>) -> Self {
        let cost = scenario.cost();
        ScenarioFile {
            name,
            cost: CostEntry {
                a_usd_per_kwh2: cost.a(),
                b_usd_per_kwh: cost.b(),
                c_usd: cost.c(),
            },
            price_usd_per_kwh: scenario.announced_price(),
            consumers: scenario
                .consumers()
                .iter()
                .map(|c| ConsumerEntry {
                    label: None,
                    count: 1,
                    alpha_usd_per_kwh2: c.alpha(),
                    prior: PriorEntry::from_prior(c.prior()),
                })
                .collect(),
        }
    }
}
