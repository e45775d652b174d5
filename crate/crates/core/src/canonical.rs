//! Bias, agreement type and price regimes of a subgame.

use serde::Serialize;

use crate::decoupling::{EffectiveSubgame, SignalingGame};
use crate::equilibrium::{kappa_max, BrdConfig};
use crate::error::{Error, Result};

pub use crate::equilibrium::KappaMax;

/// Gap between the sender's and the receiver's ideal action at `theta`.
pub fn bias(game: &SignalingGame, theta: f64) -> Result<f64> {
    let (lo, hi) = (game.theta_lo(), game.theta_hi());
    if !(lo..=hi).contains(&theta) {
        return Err(Error::OutsideSupport { value: theta, lo, hi });
    }
    Ok((1.0 - game.gamma()) * theta - game.delta())
}

/// Ex-ante expected bias under the type prior.
pub fn expected_bias(game: &SignalingGame) -> f64 {
    (1.0 - game.gamma()) * game.theta_prior().mean() - game.delta()
}

/// Type at which sender and receiver agree, δ/(1−γ).
pub fn agreement_theta(game: &SignalingGame) -> Result<f64> {
    if game.gamma() >= 1.0 {
        return Err(Error::NoAgreementType);
    }
    Ok(game.delta() / (1.0 - game.gamma()))
}

/// Agreement type in transformed and valuation units.
pub fn agreement_type(subgame: &EffectiveSubgame) -> Result<(f64, f64)> {
    let theta = agreement_theta(subgame.game())?;
    let omega = subgame.alpha * (subgame.price - subgame.b_eff) / (2.0 * subgame.a_eff) + subgame.price;
    Ok((theta, omega))
}

/// Sufficient condition for a two-bin equilibrium: the indifference gap
/// changes sign between the two ends of the support.
pub fn informative_equilibrium_exists(game: &SignalingGame) -> bool {
    let gamma = game.gamma();
    let mean = game.theta_prior().mean();
    let two_delta = 2.0 * game.delta();
    let lower = (2.0 - gamma) * game.theta_lo() - gamma * mean;
    let upper = (2.0 - gamma) * game.theta_hi() - gamma * mean;
    lower < two_delta && two_delta < upper
}

/// Prices for which the agreement type lies in the valuation support.
pub fn outward_price_band(subgame: &EffectiveSubgame) -> (f64, f64) {
    let (alpha, a_eff, b_eff) = (subgame.alpha, subgame.a_eff, subgame.b_eff);
    let denom = alpha + 2.0 * a_eff;
    let omega = subgame.omega_prior();
    (
        (2.0 * a_eff * omega.lo() + alpha * b_eff) / denom,
        (2.0 * a_eff * omega.hi() + alpha * b_eff) / denom,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    NonInformative,
    StrictBias,
    OutwardBias,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NonInformative => "non_informative",
            Regime::StrictBias => "strict_bias",
            Regime::OutwardBias => "outward_bias",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub kappa_max: KappaMax,
    pub kappa_at_cap: bool,
    pub agreement_omega: f64,
    pub agreement_theta: f64,
    pub price_band: (f64, f64),
    /// Outcome of the sufficient two-bin existence test.
    pub informative_sufficient: bool,
    /// The sufficient test holds but the message search found a single bin.
    pub signals_disagree: bool,
}

pub fn classify_regime(subgame: &EffectiveSubgame, config: &BrdConfig, kappa_cap: usize) -> Result<RegimeReport> {
    let (agreement_theta, agreement_omega) = agreement_type(subgame)?;
    let price_band = outward_price_band(subgame);
    let informative_sufficient = informative_equilibrium_exists(subgame.game());
    let km = kappa_max(subgame.game(), config, kappa_cap)?;
    let omega = subgame.omega_prior();
    let inside = omega.lo() <= agreement_omega && agreement_omega <= omega.hi();

    let (regime, kappa_max) = if inside || km.value.is_infinite() {
        (Regime::OutwardBias, KappaMax::Infinite)
    } else if km.value == KappaMax::Finite(1) && !informative_sufficient {
        (Regime::NonInformative, km.value)
    } else {
        (Regime::StrictBias, km.value)
    };
    Ok(RegimeReport {
        regime,
        kappa_max,
        kappa_at_cap: km.at_cap,
        agreement_omega,
        agreement_theta,
        price_band,
        informative_sufficient,
        signals_disagree: informative_sufficient && km.value == KappaMax::Finite(1),
    })
}

/// Largest message count every consumer supports simultaneously.
pub fn system_kappa_max(values: impl IntoIterator<Item = KappaMax>) -> KappaMax {
    values.into_iter().min().unwrap_or(KappaMax::Infinite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Prior;
    use approx::assert_relative_eq;

    fn game(gamma: f64, delta: f64) -> SignalingGame {
        SignalingGame::new(gamma, delta, Prior::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn bias_values() {
        assert_relative_eq!(bias(&game(0.6, 0.2), 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(bias(&game(0.6, 0.0), 1.0).unwrap(), 0.4, epsilon = 1e-15);
        assert!(matches!(bias(&game(0.6, 0.0), 1.5), Err(Error::OutsideSupport { .. })));
    }

    #[test]
    fn agreement_theta_values() {
        assert_relative_eq!(agreement_theta(&game(0.6, 0.2)).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(agreement_theta(&game(0.6, 0.0)).unwrap(), 0.0);
        assert_eq!(agreement_theta(&game(1.0, 0.1)), Err(Error::NoAgreementType));
    }

    #[test]
    fn informative_band_is_strict() {
        // Band for 2δ is (−0.25, 1.25).
        assert!(informative_equilibrium_exists(&game(0.5, 0.0)));
        assert!(!informative_equilibrium_exists(&game(0.5, 0.625)));
        assert!(!informative_equilibrium_exists(&game(0.5, 10.0)));
        assert!(informative_equilibrium_exists(&game(0.5, 0.62)));
    }

    #[test]
    fn system_kappa_is_minimum() {
        let ks = [KappaMax::Finite(4), KappaMax::Finite(3), KappaMax::Infinite];
        assert_eq!(system_kappa_max(ks), KappaMax::Finite(3));
        assert_eq!(system_kappa_max([KappaMax::Infinite]), KappaMax::Infinite);
    }
}
