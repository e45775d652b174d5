//! The aggregator's dispatch rule and the reduction of the N-consumer game
//! to independent single-sender subgames.
//!
//! Under active participation every allocation is affine in the vector of
//! posterior means, so consumer n only ever faces the expectation of the
//! other consumers' reports. That expectation equals their prior means,
//! which folds the rest of the population into an effective cost curve
//! `(a_eff, b_eff)` seen by consumer n alone.

use crate::error::{Error, Result};
use crate::population::{Prior, Scenario};

/// Allocations returned by the aggregator, with a flag for each consumer
/// whose non-negativity constraint binds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub allocations: Vec<f64>,
    pub clipped: Vec<bool>,
}

impl Dispatch {
    pub fn total(&self) -> f64 {
        self.allocations.iter().sum()
    }

    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|&c| c)
    }
}

/// Interior welfare-maximizing allocation restricted to `active`
/// (everyone else receives zero).
fn interior_allocation(omega_hat: &[f64], scenario: &Scenario, active: &[bool]) -> Vec<f64> {
    let a = scenario.cost().a();
    let b = scenario.cost().b();
    let consumers = scenario.consumers();
    let (mut sum_y, mut sum_inv) = (0.0, 0.0);
    for ((c, &w), &on) in consumers.iter().zip(omega_hat).zip(active) {
        if on {
            sum_y += (w - b) / c.alpha();
            sum_inv += 1.0 / c.alpha();
        }
    }
    let load = sum_y / (1.0 + 2.0 * a * sum_inv);
    consumers
        .iter()
        .zip(omega_hat)
        .zip(active)
        .map(|((c, &w), &on)| {
            if on {
                (w - b) / c.alpha() - 2.0 * a / c.alpha() * load
            } else {
                0.0
            }
        })
        .collect()
}

fn check_beliefs(omega_hat: &[f64], scenario: &Scenario) -> Result<()> {
    if scenario.is_empty() {
        return Err(Error::EmptyScenario);
    }
    if omega_hat.len() != scenario.len() {
        return Err(Error::LengthMismatch {
            expected: scenario.len(),
            actual: omega_hat.len(),
        });
    }
    Ok(())
}

/// Unconstrained first-order solution; affine in `omega_hat` and exact
/// whenever every entry is positive.
pub fn unconstrained_allocation(omega_hat: &[f64], scenario: &Scenario) -> Result<Vec<f64>> {
    check_beliefs(omega_hat, scenario)?;
    Ok(interior_allocation(omega_hat, scenario, &vec![true; scenario.len()]))
}

/// Welfare-maximizing dispatch given posterior means, with `x >= 0`.
///
/// Consumers with a negative interior allocation are removed one at a time,
/// most negative first, and the interior problem is re-solved over the rest.
pub fn aggregator_best_response(omega_hat: &[f64], scenario: &Scenario) -> Result<Dispatch> {
    check_beliefs(omega_hat, scenario)?;
    let mut active = vec![true; scenario.len()];
    loop {
        let x = interior_allocation(omega_hat, scenario, &active);
        let worst = x
            .iter()
            .enumerate()
            .filter(|&(i, &v)| active[i] && v < 0.0)
            .min_by(|l, r| l.1.total_cmp(r.1))
            .map(|(i, _)| i);
        match worst {
            Some(i) => active[i] = false,
            None => {
                return Ok(Dispatch {
                    allocations: x,
                    clipped: active.iter().map(|&on| !on).collect(),
                })
            }
        }
    }
}

/// Canonical single-sender game: the sender's ideal action is its type θ,
/// the receiver's ideal action is `gamma * θ + delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalingGame {
    gamma: f64,
    delta: f64,
    theta_prior: Prior,
}

impl SignalingGame {
    /// `gamma` may equal one (constant bias).
    pub fn new(gamma: f64, delta: f64, theta_prior: Prior) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid("gamma", format!("must lie in (0, 1], got {gamma}")));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        Ok(SignalingGame {
            gamma,
            delta,
            theta_prior,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn theta_prior(&self) -> &Prior {
        &self.theta_prior
    }

    pub fn theta_lo(&self) -> f64 {
        self.theta_prior.lo()
    }

    pub fn theta_hi(&self) -> f64 {
        self.theta_prior.hi()
    }

    pub fn width(&self) -> f64 {
        self.theta_hi() - self.theta_lo()
    }

    /// Receiver's ideal action g(θ).
    pub fn response(&self, theta: f64) -> f64 {
        self.gamma * theta + self.delta
    }

    /// E[g(θ) | θ ∈ (lo, hi)].
    pub fn centroid(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.response(self.theta_prior.conditional_mean(lo, hi)?))
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        SignalingGame::new(self.gamma, delta, self.theta_prior)
    }
}

/// The game consumer n effectively plays against the aggregator.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSubgame {
    pub consumer_index: usize,
    pub a_eff: f64,
    pub b_eff: f64,
    pub alpha: f64,
    pub price: f64,
    omega_prior: Prior,
    game: SignalingGame,
}

impl EffectiveSubgame {
    pub fn game(&self) -> &SignalingGame {
        &self.game
    }

    pub fn gamma(&self) -> f64 {
        self.game.gamma
    }

    pub fn delta(&self) -> f64 {
        self.game.delta
    }

    pub fn theta_prior(&self) -> &Prior {
        &self.game.theta_prior
    }

    pub fn omega_prior(&self) -> &Prior {
        &self.omega_prior
    }

    pub fn theta_lo(&self) -> f64 {
        self.game.theta_lo()
    }

    pub fn theta_hi(&self) -> f64 {
        self.game.theta_hi()
    }

    pub fn theta_of(&self, omega: f64) -> f64 {
        (omega - self.price) / self.alpha
    }

    pub fn omega_of(&self, theta: f64) -> f64 {
        self.alpha * theta + self.price
    }

    /// Receiver best response to belief `omega_hat` in the reduced game.
    pub fn expected_allocation(&self, omega_hat: f64) -> f64 {
        (omega_hat - self.b_eff) / (self.alpha + 2.0 * self.a_eff)
    }
}

/// `(a_eff, b_eff)` for consumer n; independent of the price.
pub fn effective_cost(scenario: &Scenario, n: usize) -> Result<(f64, f64)> {
    scenario.consumer(n)?;
    let a = scenario.cost().a();
    let b = scenario.cost().b();
    let (mut inv, mut gap) = (0.0, 0.0);
    for (j, c) in scenario.consumers().iter().enumerate() {
        if j != n {
            inv += 1.0 / c.alpha();
            gap += (c.prior().mean() - b) / c.alpha();
        }
    }
    let denom = 1.0 + 2.0 * a * inv;
    Ok((a / denom, b + 2.0 * a * gap / denom))
}

/// Build the effective single-sender game for consumer `n` at the
/// scenario's announced price.
pub fn effective_subgame(scenario: &Scenario, n: usize) -> Result<EffectiveSubgame> {
    let consumer = *scenario.consumer(n)?;
    let price = scenario.price()?;
    let (a_eff, b_eff) = effective_cost(scenario, n)?;
    let alpha = consumer.alpha();
    let denom = alpha + 2.0 * a_eff;
    let theta_prior = consumer.prior().affine(1.0 / alpha, -price / alpha)?;
    let game = SignalingGame {
        gamma: alpha / denom,
        delta: (price - b_eff) / denom,
        theta_prior,
    };
    Ok(EffectiveSubgame {
        consumer_index: n,
        a_eff,
        b_eff,
        alpha,
        price,
        omega_prior: *consumer.prior(),
        game,
    })
}

/// Every consumer's subgame at the announced price.
pub fn effective_subgames(scenario: &Scenario) -> Result<Vec<EffectiveSubgame>> {
    (0..scenario.len()).map(|n| effective_subgame(scenario, n)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationReport {
    pub holds: bool,
    pub worst_consumer: usize,
    /// Smallest unconstrained allocation over all adversarial belief vertices.
    pub worst_margin: f64,
}

/// Sufficient check for active participation.
///
/// Allocation n is increasing in its own belief and decreasing in everyone
/// else's, so its minimum over the support box sits at the vertex where n
/// reports its lowest type and all others their highest.
pub fn check_active_participation(scenario: &Scenario) -> ParticipationReport {
    let highs: Vec<f64> = scenario.consumers().iter().map(|c| c.prior().hi()).collect();
    let mut worst = (0, f64::INFINITY);
    for (n, c) in scenario.consumers().iter().enumerate() {
        let mut beliefs = highs.clone();
        beliefs[n] = c.prior().lo();
        let x = interior_allocation(&beliefs, scenario, &vec![true; scenario.len()]);
        if x[n] < worst.1 {
            worst = (n, x[n]);
        }
    }
    ParticipationReport {
        holds: worst.1 > 0.0,
        worst_consumer: worst.0,
        worst_margin: worst.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{ConsumerSpec, CostParams};
    use approx::assert_relative_eq;

    fn scenario(alphas: &[f64], supports: &[(f64, f64)], a: f64, b: f64, price: Option<f64>) -> Scenario {
        let consumers = alphas
            .iter()
            .zip(supports)
            .map(|(&al, &(lo, hi))| ConsumerSpec::new(Prior::uniform(lo, hi).unwrap(), al).unwrap())
            .collect();
        Scenario::new(consumers, CostParams::new(a, b, 0.0).unwrap(), price).unwrap()
    }

    #[test]
    fn single_consumer_first_order_condition() {
        let s = scenario(&[2.0], &[(3.0, 5.0)], 0.5, 0.0, None);
        let d = aggregator_best_response(&[4.0], &s).unwrap();
        // ω̂ − αx − 2ax − b = 0
        assert_relative_eq!(d.allocations[0], 4.0 / 3.0, epsilon = 1e-14);
        assert!(!d.any_clipped());
    }

    #[test]
    fn two_consumer_linear_system() {
        let s = scenario(&[1.0, 1.0], &[(1.0, 4.0), (1.0, 4.0)], 0.5, 0.0, None);
        let d = aggregator_best_response(&[3.0, 2.0], &s).unwrap();
        assert_relative_eq!(d.total(), 5.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(d.allocations[0], 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(d.allocations[1], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_at_participation_boundary() {
        let s = scenario(&[1.0, 2.0, 0.5], &[(1.0, 3.0); 3], 0.3, 2.0, None);
        let d = aggregator_best_response(&[2.0, 2.0, 2.0], &s).unwrap();
        assert!(d.allocations.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn active_set_clipping() {
        let s = scenario(&[1.0, 1.0], &[(1.0, 4.0), (1.0, 4.0)], 0.5, 0.0, None);
        // Interior solution for (3, 0.5) gives x_2 < 0; with consumer 2 out,
        // x_1 solves 3 − x − x = 0.
        let d = aggregator_best_response(&[3.0, 0.5], &s).unwrap();
        assert_eq!(d.clipped, vec![false, true]);
        assert_relative_eq!(d.allocations[0], 1.5, epsilon = 1e-14);
        assert_eq!(d.allocations[1], 0.0);
    }

    #[test]
    fn best_response_errors() {
        let s = scenario(&[1.0], &[(1.0, 2.0)], 0.5, 0.0, None);
        assert!(matches!(
            aggregator_best_response(&[1.0, 2.0], &s),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn single_consumer_effective_parameters() {
        let s = scenario(&[1.0], &[(2.0, 4.0)], 0.5, 1.0, Some(2.0));
        let g = effective_subgame(&s, 0).unwrap();
        assert_eq!(g.a_eff, 0.5);
        assert_eq!(g.b_eff, 1.0);
        assert_relative_eq!(g.gamma(), 0.5);
    }

    #[test]
    fn two_consumer_effective_parameters() {
        // E[ω_2] = 3
        let s = scenario(&[1.0, 2.0], &[(2.0, 4.0), (2.0, 4.0)], 0.5, 1.0, Some(2.0));
        let g = effective_subgame(&s, 0).unwrap();
        assert_relative_eq!(g.a_eff, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g.b_eff, 5.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g.gamma(), 0.6, epsilon = 1e-15);
        assert_relative_eq!(g.delta(), (2.0 - 5.0 / 3.0) / (1.0 + 2.0 / 3.0), epsilon = 1e-15);
        assert_relative_eq!(g.theta_lo(), 0.0);
        assert_relative_eq!(g.theta_hi(), 2.0);
    }

    #[test]
    fn subgame_requires_price_and_valid_index() {
        let s = scenario(&[1.0], &[(2.0, 4.0)], 0.5, 1.0, None);
        assert_eq!(effective_subgame(&s, 0), Err(Error::MissingPrice));
        let s = s.with_price(1.0).unwrap();
        assert!(matches!(effective_subgame(&s, 3), Err(Error::InvalidIndex { .. })));
    }

    #[test]
    fn participation_failure_detected() {
        let eps = 1e-9;
        let s = scenario(&[1.0, 1.0], &[(3.0, 3.0 + eps), (1.0, 1.0 + eps)], 0.5, 0.0, None);
        let r = check_active_participation(&s);
        assert!(!r.holds);
        assert_eq!(r.worst_consumer, 1);
        assert_relative_eq!(r.worst_margin, -1.0 / 3.0, epsilon = 1e-8);

        let below = scenario(&[1.0, 1.0], &[(1.0, 2.0), (1.0, 2.0)], 0.5, 5.0, None);
        let r = check_active_participation(&below);
        assert!(!r.holds && r.worst_margin < 0.0);
    }

    #[test]
    fn signaling_game_rejects_bad_gamma() {
        let p = Prior::uniform(0.0, 1.0).unwrap();
        assert!(SignalingGame::new(0.0, 0.0, p).is_err());
        assert!(SignalingGame::new(1.5, 0.0, p).is_err());
        assert!(SignalingGame::new(1.0, 0.0, p).is_ok());
    }
}
