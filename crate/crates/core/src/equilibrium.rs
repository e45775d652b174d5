//! Partition equilibria of the canonical signaling game.
//!
//! A κ-bin equilibrium is a fixed point of two maps: the receiver plays the
//! centroid of `g` over each bin, and every interior boundary type is
//! indifferent between the two adjacent actions, i.e. sits at their midpoint.
//! Iterating the two maps is the strategic counterpart of Lloyd–Max
//! quantizer design.

use serde::{Serialize, Serializer};
use std::fmt;

use crate::decoupling::SignalingGame;
use crate::error::{Error, Result};
use crate::population::Prior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdConfig {
    /// Stop once the sup-norm boundary change is at most this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Smallest admissible boundary spacing; `None` means 1e-8 of the type
    /// support width.
    pub min_gap: Option<f64>,
}

impl Default for BrdConfig {
    fn default() -> Self {
        BrdConfig {
            epsilon: 1e-10,
            max_iterations: 10_000,
            min_gap: None,
        }
    }
}

impl BrdConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        BrdConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        if let Some(g) = self.min_gap {
            if !(g >= 0.0) {
                return Err(Error::invalid("min_gap", format!("must be non-negative, got {g}")));
            }
        }
        Ok(())
    }

    pub fn min_gap_for(&self, game: &SignalingGame) -> f64 {
        self.min_gap.unwrap_or(1e-8 * game.width())
    }
}

/// Boundaries μ_0 < … < μ_κ in type space and the action induced in each bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub boundaries: Vec<f64>,
    pub actions: Vec<f64>,
    pub kappa: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation of the indifference and centroid conditions.
    pub residual: f64,
    /// Two boundaries crossed or came closer than the minimum gap.
    pub collapsed: bool,
    /// Sup-norm boundary change after each iteration.
    pub history: Vec<f64>,
}

impl Partition {
    pub fn is_valid(&self, min_gap: f64) -> bool {
        self.converged
            && !self.collapsed
            && self.boundaries.windows(2).all(|w| w[1] - w[0] >= min_gap && w[1] > w[0])
    }

    pub fn bin_probabilities(&self, prior: &Prior) -> Vec<f64> {
        self.boundaries
            .windows(2)
            .map(|w| prior.probability(w[0], w[1]))
            .collect()
    }

    /// Index of the bin containing `theta`; types outside the support map
    /// to the nearest end bin.
    pub fn bin_of(&self, theta: f64) -> usize {
        let interior = &self.boundaries[1..self.kappa];
        interior.partition_point(|&b| b < theta)
    }

    pub fn indifference_residual(&self) -> f64 {
        (1..self.kappa)
            .map(|i| (self.boundaries[i] - 0.5 * (self.actions[i - 1] + self.actions[i])).abs())
            .fold(0.0, f64::max)
    }

    pub fn centroid_residual(&self, game: &SignalingGame) -> f64 {
        self.boundaries
            .windows(2)
            .zip(&self.actions)
            .map(|(w, &x)| match game.centroid(w[0], w[1]) {
                Ok(c) => (x - c).abs(),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Boundaries mapped through `omega = scale * theta + shift`.
    pub fn mapped_boundaries(&self, scale: f64, shift: f64) -> Vec<f64> {
        self.boundaries.iter().map(|&t| scale * t + shift).collect()
    }
}

fn check_kappa(kappa: usize) -> Result<()> {
    if kappa < 1 {
        return Err(Error::invalid("kappa", "at least one bin is required"));
    }
    Ok(())
}

fn centroids(game: &SignalingGame, boundaries: &[f64]) -> Option<Vec<f64>> {
    boundaries
        .windows(2)
        .map(|w| game.centroid(w[0], w[1]).ok())
        .collect()
}

fn trivial_partition(game: &SignalingGame) -> Result<Partition> {
    let (lo, hi) = (game.theta_lo(), game.theta_hi());
    Ok(Partition {
        boundaries: vec![lo, hi],
        actions: vec![game.centroid(lo, hi)?],
        kappa: 1,
        converged: true,
        iterations: 0,
        residual: 0.0,
        collapsed: false,
        history: Vec::new(),
    })
}

/// Best-response dynamics from equally spaced boundaries.
pub fn brd_solve(game: &SignalingGame, kappa: usize, config: &BrdConfig) -> Result<Partition> {
    check_kappa(kappa)?;
    let (lo, hi) = (game.theta_lo(), game.theta_hi());
    let step = (hi - lo) / kappa as f64;
    let mut init: Vec<f64> = (0..=kappa).map(|i| lo + step * i as f64).collect();
    init[kappa] = hi;
    brd_solve_from(game, init, config)
}

/// Best-response dynamics from a caller-supplied starting partition.
pub fn brd_solve_from(game: &SignalingGame, initial: Vec<f64>, config: &BrdConfig) -> Result<Partition> {
    config.validate()?;
    if initial.len() < 2 {
        return Err(Error::invalid("boundaries", "need at least two boundaries"));
    }
    let kappa = initial.len() - 1;
    let (lo, hi) = (game.theta_lo(), game.theta_hi());
    if initial[0] != lo || initial[kappa] != hi || initial.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPartition(
            "initial boundaries must span the type support in increasing order".into(),
        ));
    }
    if kappa == 1 {
        return trivial_partition(game);
    }
    let min_gap = config.min_gap_for(game);

    let mut mu = initial;
    let mut actions = centroids(game, &mu).expect("increasing boundaries inside the support");
    let mut history = Vec::new();
    let mut converged = false;
    let mut collapsed = false;
    for _ in 0..config.max_iterations {
        let mut next = mu.clone();
        for i in 1..kappa {
            next[i] = 0.5 * (actions[i - 1] + actions[i]);
        }
        let change = mu
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(change);
        mu = next;
        if mu.windows(2).any(|w| !(w[1] - w[0] >= min_gap && w[1] > w[0])) {
            collapsed = true;
            break;
        }
        actions = match centroids(game, &mu) {
            Some(a) => a,
            None => {
                collapsed = true;
                break;
            }
        };
        if change <= config.epsilon {
            converged = true;
            break;
        }
    }

    let mut partition = Partition {
        iterations: history.len(),
        boundaries: mu,
        actions,
        kappa,
        converged,
        residual: 0.0,
        collapsed,
        history,
    };
    partition.residual = if collapsed {
        f64::INFINITY
    } else {
        partition
            .indifference_residual()
            .max(partition.centroid_residual(game))
    };
    Ok(partition)
}

/// sinh(m λ) / sinh(k λ) without overflow for large arguments.
fn sinh_ratio(m: f64, k: f64, lambda: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let e = |x: f64| -(-2.0 * x * lambda).exp_m1();
    ((m - k) * lambda).exp() * e(m) / e(k)
}

/// Closed-form κ-bin equilibrium for a uniform type prior.
///
/// With midpoint centroids the boundaries follow
/// `μ_{i+1} − ((4 − 2γ)/γ) μ_i + μ_{i−1} = −4δ/γ` with both ends pinned.
/// For γ < 1 the characteristic roots are `e^{±λ}` with
/// `cosh λ = (2 − γ)/γ` and the particular solution is the agreement type;
/// for γ = 1 the root is double and the particular part is `−2δ i²`.
pub fn uniform_closed_form(game: &SignalingGame, kappa: usize) -> Result<Partition> {
    check_kappa(kappa)?;
    if !game.theta_prior().is_uniform() {
        return Err(Error::NonUniformPrior);
    }
    let (gamma, delta) = (game.gamma(), game.delta());
    let (lo, hi) = (game.theta_lo(), game.theta_hi());
    let k = kappa as f64;
    let boundaries: Vec<f64> = if gamma < 1.0 {
        let fixed = delta / (1.0 - gamma);
        let lambda = ((2.0 - gamma) / gamma).acosh();
        (0..=kappa)
            .map(|i| {
                let i = i as f64;
                fixed
                    + (lo - fixed) * sinh_ratio(k - i, k, lambda)
                    + (hi - fixed) * sinh_ratio(i, k, lambda)
            })
            .collect()
    } else {
        let slope = (hi - lo + 2.0 * delta * k * k) / k;
        (0..=kappa)
            .map(|i| {
                let i = i as f64;
                lo + slope * i - 2.0 * delta * i * i
            })
            .collect()
    };
    let mut boundaries = boundaries;
    boundaries[0] = lo;
    boundaries[kappa] = hi;
    let min_gap = 1e-8 * (hi - lo);
    if boundaries.windows(2).any(|w| !(w[1] - w[0] >= min_gap)) {
        return Err(Error::InvalidPartition(format!(
            "no monotone {kappa}-bin solution (gamma = {gamma}, delta = {delta})"
        )));
    }
    let actions: Vec<f64> = boundaries
        .windows(2)
        .map(|w| gamma * 0.5 * (w[0] + w[1]) + delta)
        .collect();
    let mut partition = Partition {
        boundaries,
        actions,
        kappa,
        converged: true,
        iterations: 0,
        residual: 0.0,
        collapsed: false,
        history: Vec::new(),
    };
    partition.residual = partition.indifference_residual();
    Ok(partition)
}

/// Largest number of equilibrium messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KappaMax {
    Finite(usize),
    Infinite,
}

impl KappaMax {
    pub fn is_infinite(&self) -> bool {
        matches!(self, KappaMax::Infinite)
    }

    /// `min(self, cap)` as a concrete bin count.
    pub fn capped(&self, cap: usize) -> usize {
        match *self {
            KappaMax::Finite(k) => k.min(cap),
            KappaMax::Infinite => cap,
        }
    }
}

impl fmt::Display for KappaMax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaMax::Finite(k) => write!(f, "{k}"),
            KappaMax::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for KappaMax {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KappaMax::Finite(k) => s.serialize_u64(*k as u64),
            KappaMax::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaMaxResult {
    pub value: KappaMax,
    /// The search stopped at the cap rather than at an invalid partition.
    pub at_cap: bool,
    /// Bin count at which BRD ran out of iterations without its boundaries
    /// collapsing; such a count is treated as unsupported.
    pub nonconverged_at: Option<usize>,
}

/// True when the bias changes sign on the closed type support.
pub fn has_outward_bias(game: &SignalingGame) -> bool {
    if game.gamma() < 1.0 {
        let agreement = game.delta() / (1.0 - game.gamma());
        game.theta_lo() <= agreement && agreement <= game.theta_hi()
    } else {
        game.delta() == 0.0
    }
}

/// Count messages upward from one until BRD stops producing a valid partition.
pub fn kappa_max(game: &SignalingGame, config: &BrdConfig, kappa_cap: usize) -> Result<KappaMaxResult> {
    config.validate()?;
    if kappa_cap < 1 {
        return Err(Error::invalid("kappa_cap", "must be at least 1"));
    }
    if has_outward_bias(game) {
        return Ok(KappaMaxResult {
            value: KappaMax::Infinite,
            at_cap: false,
            nonconverged_at: None,
        });
    }
    let min_gap = config.min_gap_for(game);
    let mut kappa = 1;
    while kappa < kappa_cap {
        let candidate = brd_solve(game, kappa + 1, config)?;
        if candidate.is_valid(min_gap) {
            kappa += 1;
        } else {
            let nonconverged_at = (!candidate.converged && !candidate.collapsed).then_some(kappa + 1);
            return Ok(KappaMaxResult {
                value: KappaMax::Finite(kappa),
                at_cap: false,
                nonconverged_at,
            });
        }
    }
    Ok(KappaMaxResult {
        value: KappaMax::Finite(kappa),
        at_cap: true,
        nonconverged_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_game(gamma: f64, delta: f64) -> SignalingGame {
        SignalingGame::new(gamma, delta, Prior::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    /// Root of D(μ) = ½(E[g | θ ≤ μ] + E[g | θ > μ]) − μ by bisection.
    fn two_bin_boundary_by_bisection(game: &SignalingGame) -> f64 {
        let d = |m: f64| {
            let left = game.centroid(game.theta_lo(), m).unwrap();
            let right = game.centroid(m, game.theta_hi()).unwrap();
            0.5 * (left + right) - m
        };
        let (mut a, mut b) = (game.theta_lo() + 1e-12, game.theta_hi() - 1e-12);
        assert!(d(a) * d(b) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if d(a) * d(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn constant_bias_two_bins() {
        let g = unit_game(1.0, -0.05);
        let p = brd_solve(&g, 2, &BrdConfig::default()).unwrap();
        assert!(p.converged);
        assert_relative_eq!(p.boundaries[1], 0.4, epsilon = 1e-9);
        assert_relative_eq!(two_bin_boundary_by_bisection(&g), 0.4, epsilon = 1e-9);
    }

    #[test]
    fn single_bin_is_prior_response() {
        let g = SignalingGame::new(0.7, 0.3, Prior::truncated_normal(1.0, 0.5, 0.0, 3.0).unwrap()).unwrap();
        let p = brd_solve(&g, 1, &BrdConfig::default()).unwrap();
        assert_eq!(p.boundaries, vec![0.0, 3.0]);
        assert_relative_eq!(p.actions[0], 0.7 * g.theta_prior().mean() + 0.3, epsilon = 1e-14);
        assert!(p.converged);
        assert_eq!(p.iterations, 0);
    }

    #[test]
    fn constant_bias_closed_form_three_bins() {
        let g = unit_game(1.0, -0.05);
        let p = uniform_closed_form(&g, 3).unwrap();
        let expected = [0.0, 2.0 / 15.0, 7.0 / 15.0, 1.0];
        for (got, want) in p.boundaries.iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        let second_difference: Vec<f64> = p.boundaries.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        for d in second_difference {
            assert_relative_eq!(d, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_recurrence_residual_state_dependent() {
        let (gamma, delta) = (0.6, 0.15);
        let g = unit_game(gamma, delta);
        let p = uniform_closed_form(&g, 6).unwrap();
        for w in p.boundaries.windows(3) {
            let lhs = w[2] - (4.0 - 2.0 * gamma) / gamma * w[1] + w[0];
            assert_relative_eq!(lhs, -4.0 * delta / gamma, epsilon = 1e-11);
        }
    }

    #[test]
    fn closed_form_single_bin_and_errors() {
        let g = unit_game(0.5, 0.0);
        assert_eq!(uniform_closed_form(&g, 1).unwrap().boundaries, vec![0.0, 1.0]);
        let tn = SignalingGame::new(0.5, 0.0, Prior::truncated_normal(0.5, 1.0, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(uniform_closed_form(&tn, 2), Err(Error::NonUniformPrior));
        // Constant bias 0.05 supports only three bins.
        assert!(matches!(
            uniform_closed_form(&unit_game(1.0, -0.05), 4),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn closed_form_agrees_with_brd() {
        let g = unit_game(0.8, 0.2);
        let exact = uniform_closed_form(&g, 5).unwrap();
        let brd = brd_solve(&g, 5, &BrdConfig::with_epsilon(1e-13)).unwrap();
        assert!(brd.converged);
        for (a, b) in exact.boundaries.iter().zip(&brd.boundaries) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_bias_kappa_max() {
        let r = kappa_max(&unit_game(1.0, -0.05), &BrdConfig::default(), 64).unwrap();
        assert_eq!(r.value, KappaMax::Finite(3));
        assert!(!r.at_cap);
    }

    #[test]
    fn interior_agreement_type_is_unbounded() {
        let r = kappa_max(&unit_game(0.6, 0.2), &BrdConfig::default(), 64).unwrap();
        assert_eq!(r.value, KappaMax::Infinite);
    }

    #[test]
    fn cap_binds() {
        let r = kappa_max(&unit_game(1.0, -1e-5), &BrdConfig::default(), 4).unwrap();
        assert_eq!(r.value, KappaMax::Finite(4));
        assert!(r.at_cap);
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let g = unit_game(0.9, 0.05);
        let cfg = BrdConfig {
            epsilon: 1e-14,
            max_iterations: 3,
            min_gap: None,
        };
        let p = brd_solve(&g, 6, &cfg).unwrap();
        assert!(!p.converged);
        assert_eq!(p.iterations, 3);
        assert_eq!(p.history.len(), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = unit_game(0.5, 0.0);
        assert!(brd_solve(&g, 0, &BrdConfig::default()).is_err());
        let bad = BrdConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(brd_solve(&g, 2, &bad).is_err());
        assert!(brd_solve_from(&g, vec![0.0, 0.7, 0.3, 1.0], &BrdConfig::default()).is_err());
    }

    #[test]
    fn bin_lookup() {
        let p = uniform_closed_form(&unit_game(1.0, -0.05), 3).unwrap();
        assert_eq!(p.bin_of(-1.0), 0);
        assert_eq!(p.bin_of(0.1), 0);
        assert_eq!(p.bin_of(0.2), 1);
        assert_eq!(p.bin_of(0.9), 2);
        assert_eq!(p.bin_of(2.0), 2);
    }

    #[test]
    fn kappa_max_ordering() {
        assert!(KappaMax::Finite(100) < KappaMax::Infinite);
        assert_eq!(KappaMax::Infinite.capped(10), 10);
        assert_eq!(KappaMax::Finite(3).capped(10), 3);
        assert_eq!(KappaMax::Infinite.to_string(), "inf");
    }
}
