#![allow(dead_code)]

use drtalk_core::{ConsumerSpec, CostParams, Prior, Scenario};

pub fn table1_groups() -> Vec<ConsumerSpec> {
    vec![
        ConsumerSpec::new(Prior::truncated_normal(10.5, 0.25, 10.0, 11.0).unwrap(), 0.30).unwrap(),
        ConsumerSpec::new(Prior::uniform(12.0, 13.0).unwrap(), 0.35).unwrap(),
        ConsumerSpec::new(Prior::uniform(14.0, 15.0).unwrap(), 0.45).unwrap(),
    ]
}

pub fn table1(price: Option<f64>) -> Scenario {
    Scenario::new(table1_groups(), CostParams::new(0.051, 7.89, 0.0).unwrap(), price).unwrap()
}

pub fn group1(n: usize, price: Option<f64>) -> Scenario {
    let c = table1_groups()[0];
    Scenario::new(vec![c; n], CostParams::new(0.1, 9.0, 0.0).unwrap(), price).unwrap()
}

/// Adaptive double-exponential quadrature; independent of the library's
/// closed forms.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    quadrature::double_exponential::integrate(f, lo, hi, 1e-12).integral
}
