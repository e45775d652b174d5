//! Strategic communication in demand response.
//!
//! A population of consumers privately knows its valuations and reports
//! them through costless messages to a welfare-maximizing aggregator. The
//! crate reduces the N-consumer game to independent single-sender subgames,
//! computes their partition equilibria, finds the uniform tariff that
//! minimizes strategic bias, and measures how much welfare the resulting
//! communication recovers.

pub mod canonical;
pub mod decoupling;
pub mod equilibrium;
mod error;
pub mod population;
pub mod pricing;
mod stats;
pub mod welfare;

pub use canonical::{
    agreement_type, bias, classify_regime, informative_equilibrium_exists, system_kappa_max,
    Regime, RegimeReport,
};
pub use decoupling::{
    aggregator_best_response, check_active_participation, effective_subgame, Dispatch,
    EffectiveSubgame, ParticipationReport, SignalingGame,
};
pub use equilibrium::{
    brd_solve, kappa_max, uniform_closed_form, BrdConfig, KappaMax, KappaMaxResult, Partition,
};
pub use error::{Error, Result};
pub use population::{ConsumerSpec, CostParams, Prior, PriorKind, Scenario};
pub use pricing::{asymptotic_price, optimal_price, per_consumer_optimal_price, PopulationLimit};
pub use welfare::{
    recovered_welfare, welfare_fc, welfare_nc, welfare_report, welfare_sit, welfare_sit_mc,
    WelfareMethod, WelfareReport,
};
