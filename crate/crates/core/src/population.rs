//! Consumers, aggregator cost and type priors.
//!
//! Every prior lives on a closed, bounded support `[lo, hi]`. Conditioning
//! intervals are clipped to the support before any moment is evaluated.

use rand::{Rng, RngExt};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Intervals narrower than this many standard deviations are integrated
/// numerically instead of through the erfc ratio.
const NARROW_WIDTH_SIGMAS: f64 = 1e-6;

/// Below this normalizing mass the erfc route underflows; switch to
/// quadrature of the density relative to its largest value on the interval.
const TINY_MASS: f64 = 1e-280;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    Uniform { lo: f64, hi: f64 },
    /// Normal(mu, sigma^2) conditioned on `[lo, hi]`; `mu` is the
    /// pre-truncation location.
    TruncatedNormal { mu: f64, sigma: f64, lo: f64, hi: f64 },
}

/// A continuous, strictly positive density on a bounded support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    kind: PriorKind,
}

impl Prior {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_support(lo, hi)?;
        Ok(Prior {
            kind: PriorKind::Uniform { lo, hi },
        })
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        check_support(lo, hi)?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
        }
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(Prior {
            kind: PriorKind::TruncatedNormal { mu, sigma, lo, hi },
        })
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, PriorKind::Uniform { .. })
    }

    pub fn lo(&self) -> f64 {
        self.support().0
    }

    pub fn hi(&self) -> f64 {
        self.support().1
    }

    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            PriorKind::Uniform { lo, hi } | PriorKind::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self.kind {
            PriorKind::Uniform { lo, hi } => 1.0 / (hi - lo),
            PriorKind::TruncatedNormal { mu, sigma, lo, hi } => {
                let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
                std_pdf((x - mu) / sigma) / (sigma * std_mass(a, b))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let lo = self.lo();
        if x <= lo {
            0.0
        } else if x >= self.hi() {
            1.0
        } else {
            self.probability(lo, x)
        }
    }

    /// P(lo < ω < hi), with the interval clipped to the support.
    pub fn probability(&self, lo: f64, hi: f64) -> f64 {
        let (s_lo, s_hi) = self.support();
        let (lo, hi) = (lo.max(s_lo), hi.min(s_hi));
        if lo >= hi {
            return 0.0;
        }
        match self.kind {
            PriorKind::Uniform { .. } => (hi - lo) / (s_hi - s_lo),
            PriorKind::TruncatedNormal { mu, sigma, .. } => {
                let z = |x: f64| (x - mu) / sigma;
                let total = std_mass(z(s_lo), z(s_hi));
                let part = std_mass(z(lo), z(hi));
                if total > TINY_MASS {
                    (part / total).clamp(0.0, 1.0)
                } else {
                    let (m_part, _, _) = relative_moments(z(lo), z(hi));
                    let (m_total, _, _) = relative_moments(z(s_lo), z(s_hi));
                    // Both masses are scaled by the same reference only when
                    // they share a reference point; rescale explicitly.
                    let shift = reference_log_density(z(lo), z(hi))
                        - reference_log_density(z(s_lo), z(s_hi));
                    (m_part / m_total * shift.exp()).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        self.moments_on(lo, hi).0
    }

    /// E[ω | ω ∈ (lo, hi) ∩ support].
    pub fn conditional_mean(&self, lo: f64, hi: f64) -> Result<f64> {
        let (c_lo, c_hi) = self.clip(lo, hi)?;
        Ok(self.moments_on(c_lo, c_hi).0)
    }

    pub fn second_moment(&self) -> f64 {
        let (lo, hi) = self.support();
        self.moments_on(lo, hi).1
    }

    pub fn variance(&self) -> f64 {
        let (lo, hi) = self.support();
        let (m1, m2) = self.moments_on(lo, hi);
        match self.kind {
            PriorKind::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            PriorKind::TruncatedNormal { .. } => (m2 - m1 * m1).max(0.0),
        }
    }

    /// Push-forward of the prior under `x -> scale * x + shift` (`scale > 0`).
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Prior> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        let f = |x: f64| scale * x + shift;
        match self.kind {
            PriorKind::Uniform { lo, hi } => Prior::uniform(f(lo), f(hi)),
            PriorKind::TruncatedNormal { mu, sigma, lo, hi } => {
                Prior::truncated_normal(f(mu), scale * sigma, f(lo), f(hi))
            }
        }
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.kind {
            PriorKind::Uniform { lo, hi } => lo + u * (hi - lo),
            PriorKind::TruncatedNormal { mu, sigma, lo, hi } => {
                let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
                // Work in the lower tail, where Φ carries full relative precision.
                let z = if a > 0.0 {
                    -std_truncated_quantile(-b, -a, 1.0 - u)
                } else {
                    std_truncated_quantile(a, b, u)
                };
                (mu + sigma * z).clamp(lo, hi)
            }
        }
    }

    fn clip(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let (s_lo, s_hi) = self.support();
        let (c_lo, c_hi) = (lo.max(s_lo), hi.min(s_hi));
        if !(c_lo < c_hi) {
            return Err(Error::EmptyConditioningEvent {
                lo,
                hi,
                support_lo: s_lo,
                support_hi: s_hi,
            });
        }
        Ok((c_lo, c_hi))
    }

    /// Conditional first and second raw moments on `[lo, hi]` (already clipped).
    fn moments_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self.kind {
            PriorKind::Uniform { .. } => {
                let m1 = 0.5 * (lo + hi);
                let m2 = (lo * lo + lo * hi + hi * hi) / 3.0;
                (m1, m2)
            }
            PriorKind::TruncatedNormal { mu, sigma, .. } => {
                let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
                let (ez, ez2) = std_truncated_moments(a, b);
                let m1 = mu + sigma * ez;
                let m2 = mu * mu + 2.0 * mu * sigma * ez + sigma * sigma * ez2;
                (m1.clamp(lo, hi), m2)
            }
        }
    }
}

fn check_support(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("support", "bounds must be finite"));
    }
    if !(lo < hi) {
        return Err(Error::invalid("support", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn std_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Φ(b) − Φ(a) without cancellation on either tail.
fn std_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * erfc(b * FRAC_1_SQRT_2) - 0.5 * erfc(-a * FRAC_1_SQRT_2)
    }
}

/// E[Z] and E[Z^2] for a standard normal conditioned on (a, b).
fn std_truncated_moments(a: f64, b: f64) -> (f64, f64) {
    let mass = std_mass(a, b);
    if b - a < NARROW_WIDTH_SIGMAS || mass < TINY_MASS {
        let (m0, m1, m2) = relative_moments(a, b);
        return (m1 / m0, m2 / m0);
    }
    let (pa, pb) = (std_pdf(a), std_pdf(b));
    let ez = (pa - pb) / mass;
    let ez2 = 1.0 + (a * pa - b * pb) / mass;
    (ez.clamp(a, b), ez2)
}

/// log of the largest standard-normal density value on [a, b].
fn reference_log_density(a: f64, b: f64) -> f64 {
    let z0 = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    -0.5 * z0 * z0
}

// 5-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Zeroth, first and second moments of exp(-(z^2 - z0^2)/2) on [a, b],
/// where z0 is the point of the interval closest to the mode.
fn relative_moments(a: f64, b: f64) -> (f64, f64, f64) {
    let log_ref = reference_log_density(a, b);
    // Beyond ~60 units of the local decay scale the relative density is < e^-60.
    let (lo, hi) = if a > 0.0 {
        (a, b.min(a + 60.0 / a.max(1.0)))
    } else if b < 0.0 {
        (a.max(b - 60.0 / (-b).max(1.0)), b)
    } else {
        (a.max(-40.0), b.min(40.0))
    };
    let panels = if hi - lo < NARROW_WIDTH_SIGMAS { 1 } else { 256 };
    let h = (hi - lo) / panels as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let z = mid + 0.5 * h * x;
            let d = w * 0.5 * h * (-0.5 * z * z - log_ref).exp();
            m0 += d;
            m1 += d * z;
            m2 += d * z * z;
        }
    }
    (m0, m1, m2)
}

/// Quantile of a standard normal truncated to (a, b) with b <= 0 or a <= 0.
fn std_truncated_quantile(a: f64, b: f64, u: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    let (ca, cb) = (n.cdf(a), n.cdf(b));
    let target = ca + u * (cb - ca);
    n.inverse_cdf(target.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)).clamp(a, b)
}

/// Quadratic aggregator cost C(X) = aX² + bX + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    a: f64,
    b: f64,
    c: f64,
}

impl CostParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", format!("must be positive, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("b", format!("must be non-negative, got {b}")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid("c", format!("must be non-negative, got {c}")));
        }
        Ok(CostParams { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn cost(&self, load: f64) -> f64 {
        self.a * load * load + self.b * load + self.c
    }

    pub fn marginal_cost(&self, load: f64) -> f64 {
        2.0 * self.a * load + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumerSpec {
    prior: Prior,
    alpha: f64,
}

impl ConsumerSpec {
    pub fn new(prior: Prior, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if prior.lo() <= 0.0 {
            return Err(Error::invalid(
                "prior",
                format!("valuation support must be strictly positive, got lo = {}", prior.lo()),
            ));
        }
        Ok(ConsumerSpec { prior, alpha })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Intrinsic benefit ωx − αx²/2.
    pub fn benefit(&self, omega: f64, x: f64) -> f64 {
        omega * x - 0.5 * self.alpha * x * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    consumers: Vec<ConsumerSpec>,
    cost: CostParams,
    price: Option<f64>,
}

impl Scenario {
    pub fn new(consumers: Vec<ConsumerSpec>, cost: CostParams, price: Option<f64>) -> Result<Self> {
        if consumers.is_empty() {
            return Err(Error::EmptyScenario);
        }
        if let Some(p) = price {
            check_price(p)?;
        }
        Ok(Scenario {
            consumers,
            cost,
            price,
        })
    }

    pub fn consumers(&self) -> &[ConsumerSpec] {
        &self.consumers
    }

    pub fn consumer(&self, n: usize) -> Result<&ConsumerSpec> {
        self.consumers.get(n).ok_or(Error::InvalidIndex {
            index: n,
            len: self.consumers.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.consumers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consumers.is_empty()
    }

    pub fn cost(&self) -> &CostParams {
        &self.cost
    }

    pub fn price(&self) -> Result<f64> {
        self.price.ok_or(Error::MissingPrice)
    }

    pub fn announced_price(&self) -> Option<f64> {
        self.price
    }

    pub fn with_price(&self, price: f64) -> Result<Scenario> {
        check_price(price)?;
        Ok(Scenario {
            price: Some(price),
            ..self.clone()
        })
    }

    pub fn with_cost(&self, cost: CostParams) -> Scenario {
        Scenario {
            cost,
            ..self.clone()
        }
    }

    pub fn prior_means(&self) -> Vec<f64> {
        self.consumers.iter().map(|c| c.prior.mean()).collect()
    }

    /// Social welfare Σ u_C,n(ω_n, x_n) − C(X) at true types `omega`.
    pub fn social_welfare(&self, omega: &[f64], x: &[f64]) -> f64 {
        let benefit: f64 = self
            .consumers
            .iter()
            .zip(omega.iter().zip(x))
            .map(|(c, (&w, &xn))| c.benefit(w, xn))
            .sum();
        benefit - self.cost.cost(x.iter().sum())
    }
}

fn check_price(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::invalid("price", format!("must be non-negative, got {p}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use quadrature::double_exponential::integrate;

    fn group1() -> Prior {
        Prior::truncated_normal(10.5, 0.25, 10.0, 11.0).unwrap()
    }

    fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        integrate(f, lo, hi, 1e-13).integral
    }

    #[test]
    fn rejects_bad_priors() {
        assert!(Prior::uniform(1.0, 1.0).is_err());
        assert!(Prior::uniform(2.0, 1.0).is_err());
        assert!(Prior::truncated_normal(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(Prior::truncated_normal(0.0, -1.0, -1.0, 1.0).is_err());
        assert!(Prior::uniform(f64::NEG_INFINITY, 1.0).is_err());
    }

    #[test]
    fn uniform_means() {
        let p = Prior::uniform(12.0, 13.0).unwrap();
        assert_eq!(p.mean(), 12.5);
        let unit = Prior::uniform(0.0, 1.0).unwrap();
        assert_relative_eq!(unit.conditional_mean(0.2, 0.6).unwrap(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(unit.second_moment(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_second_moment_matches_quadrature() {
        let p = Prior::uniform(12.0, 13.0).unwrap();
        let oracle = quad(|w| w * w, 12.0, 13.0);
        assert_relative_eq!(p.second_moment(), oracle, epsilon = 1e-9);
        assert_relative_eq!(p.second_moment(), 469.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn symmetric_truncation_keeps_mode() {
        assert_relative_eq!(group1().mean(), 10.5, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_truncated_mean_matches_quadrature() {
        let p = Prior::truncated_normal(10.5, 0.25, 10.0, 10.5).unwrap();
        let oracle = quad(|w| w * p.pdf(w), 10.0, 10.5);
        assert_relative_eq!(p.mean(), oracle, epsilon = 1e-10);
        assert_relative_eq!(p.mean(), 10.3193, epsilon = 5e-5);
    }

    #[test]
    fn truncated_conditional_mean_matches_quadrature() {
        let p = group1();
        let mass = quad(|w| p.pdf(w), 10.5, 11.0);
        let oracle = quad(|w| w * p.pdf(w), 10.5, 11.0) / mass;
        let got = p.conditional_mean(10.5, 11.0).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-10);
        assert_relative_eq!(got, 10.6807, epsilon = 5e-5);
    }

    #[test]
    fn truncated_second_moment_matches_quadrature() {
        let p = group1();
        let oracle = quad(|w| w * w * p.pdf(w), 10.0, 11.0);
        assert_relative_eq!(p.second_moment(), oracle, epsilon = 1e-8);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for p in [
            group1(),
            Prior::uniform(12.0, 13.0).unwrap(),
            Prior::truncated_normal(0.0, 1.0, 3.0, 5.0).unwrap(),
            Prior::truncated_normal(0.0, 0.1, -1.0, 7.0).unwrap(),
        ] {
            let (lo, hi) = p.support();
            assert_relative_eq!(quad(|w| p.pdf(w), lo, hi), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn empty_conditioning_event_is_an_error() {
        let p = Prior::uniform(0.0, 1.0).unwrap();
        assert!(matches!(
            p.conditional_mean(2.0, 3.0),
            Err(Error::EmptyConditioningEvent { .. })
        ));
        assert!(p.conditional_mean(0.5, 0.5).is_err());
    }

    #[test]
    fn conditioning_clips_to_support() {
        let p = Prior::uniform(0.0, 1.0).unwrap();
        assert_relative_eq!(p.conditional_mean(-5.0, 0.5).unwrap(), 0.25);
        let t = group1();
        assert_relative_eq!(t.conditional_mean(0.0, 100.0).unwrap(), t.mean(), epsilon = 1e-12);
    }

    #[test]
    fn narrow_intervals_use_stable_route() {
        let t = group1();
        let m = t.conditional_mean(10.7, 10.7 + 1e-9).unwrap();
        assert!((m - (10.7 + 5e-10)).abs() < 1e-12);
        // Far tail, where Φ differences underflow.
        let far = Prior::truncated_normal(0.0, 1.0, 40.0, 41.0).unwrap();
        let m = far.mean();
        assert!(m > 40.0 && m < 40.03, "{m}");
        assert_relative_eq!(far.probability(40.0, 41.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_push_forward() {
        let t = group1().affine(1.0 / 0.3, -9.9 / 0.3).unwrap();
        assert_relative_eq!(t.mean(), (10.5 - 9.9) / 0.3, epsilon = 1e-12);
        assert_relative_eq!(t.lo(), (10.0 - 9.9) / 0.3, epsilon = 1e-12);
        assert!(group1().affine(-1.0, 0.0).is_err());
    }

    #[test]
    fn cdf_endpoints_and_midpoint() {
        let t = group1();
        assert_eq!(t.cdf(9.0), 0.0);
        assert_eq!(t.cdf(12.0), 1.0);
        assert_relative_eq!(t.cdf(10.5), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn scenario_validation() {
        let cost = CostParams::new(0.1, 9.0, 0.0).unwrap();
        assert_eq!(Scenario::new(vec![], cost, None), Err(Error::EmptyScenario));
        let c = ConsumerSpec::new(group1(), 0.3).unwrap();
        assert!(Scenario::new(vec![c], cost, Some(-1.0)).is_err());
        assert!(ConsumerSpec::new(group1(), 0.0).is_err());
        assert!(ConsumerSpec::new(Prior::uniform(-1.0, 1.0).unwrap(), 1.0).is_err());
        assert!(CostParams::new(0.0, 1.0, 0.0).is_err());
        assert!(CostParams::new(1.0, -1.0, 0.0).is_err());
        let s = Scenario::new(vec![c], cost, None).unwrap();
        assert_eq!(s.price(), Err(Error::MissingPrice));
        assert_eq!(s.with_price(9.0).unwrap().price(), Ok(9.0));
    }
}
