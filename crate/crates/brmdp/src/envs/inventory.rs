//! Finite-horizon inventory control with lost sales and unknown Poisson
//! demand rate.
//!
//! The state is the stock level `s` in `0..=capacity`; ordering `a` units
//! (admissible while `s + a <= capacity`) and then facing demand `xi` leaves
//! `max(s + a - xi, 0)` units. Each stage pays holding on leftover stock,
//! shortage on unmet demand, and a per-unit order cost. Demand is observed
//! every stage, so the belief over the rate updates everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Environment, FamilyKind, Horizon, ParameterSpace, ParametricFamily};

/// Unknown Poisson demand rate: candidate values, the value that generates
/// the data, and an optional non-uniform prior over the candidates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub theta_space: Vec<f64>,
    pub theta_true: f64,
    #[serde(default)]
    pub prior_weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryConfig {
    pub capacity: usize,
    pub horizon: usize,
    pub initial_level: usize,
    pub holding_cost: f64,
    pub shortage_cost: f64,
    pub order_cost: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    pub demand: DemandSpec,
}

fn default_discount() -> f64 {
    1.0
}

pub fn build_inventory(cfg: &InventoryConfig) -> Result<Environment> {
    if cfg.initial_level > cfg.capacity {
        return Err(Error::Config(format!(
            "initial level {} exceeds capacity {}",
            cfg.initial_level, cfg.capacity
        )));
    }
    for (name, v) in [
        ("holding_cost", cfg.holding_cost),
        ("shortage_cost", cfg.shortage_cost),
        ("order_cost", cfg.order_cost),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
        }
    }
    if cfg.horizon == 0 {
        return Err(Error::Config("horizon must be at least one stage".into()));
    }
    let family = ParametricFamily::new(
        FamilyKind::Poisson,
        ParameterSpace::Finite(cfg.demand.theta_space.clone()),
    )?;
    let cap = cfg.capacity;
    let actions: Vec<Vec<usize>> = (0..=cap).map(|s| (0..=cap - s).collect()).collect();
    let (h, p, c) = (cfg.holding_cost, cfg.shortage_cost, cfg.order_cost);
    let env = Environment::new(
        family,
        actions,
        move |s, a, xi| (((s + a) as f64 - xi).max(0.0)) as usize,
        move |s, a, xi| {
            let stocked = (s + a) as f64;
            h * (stocked - xi).max(0.0) + p * (xi - stocked).max(0.0) + c * a as f64
        },
        Horizon::Finite {
            stages: cfg.horizon,
            discount: cfg.discount,
        },
    )?;
    env.with_initial_state(cfg.initial_level)
}
