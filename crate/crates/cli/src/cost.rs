//! Capital cost comparison between conventional and self-repositioning fleets.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub unit_cost_conventional: f64,
    pub unit_cost_autonomous: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            unit_cost_conventional: 566.0,
            unit_cost_autonomous: 1500.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.unit_cost_conventional > 0.0 && self.unit_cost_autonomous > 0.0) {
            bail!("unit costs must be positive");
        }
        Ok(())
    }

    /// Fleet fraction below which the autonomous fleet is cheaper.
    pub fn break_even_fraction(&self) -> f64 {
        self.unit_cost_conventional / self.unit_cost_autonomous
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub fleet_autonomous: u64,
    pub fleet_conventional: u64,
    pub capital_autonomous: f64,
    pub capital_conventional: f64,
    /// Autonomous over conventional capital cost; absent for an empty conventional fleet.
    pub cost_ratio: Option<f64>,
    pub fleet_ratio: Option<f64>,
    pub break_even_fraction: f64,
}

pub fn cost_compare(fleet_autonomous: u64, fleet_conventional: u64, model: &CostModel) -> CostRecord {
    let capital_autonomous = fleet_autonomous as f64 * model.unit_cost_autonomous;
    let capital_conventional = fleet_conventional as f64 * model.unit_cost_conventional;
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    CostRecord {
        fleet_autonomous,
        fleet_conventional,
        capital_autonomous,
        capital_conventional,
        cost_ratio: ratio(capital_autonomous, capital_conventional),
        fleet_ratio: ratio(fleet_autonomous as f64, fleet_conventional as f64),
        break_even_fraction: model.break_even_fraction(),
    }
}
