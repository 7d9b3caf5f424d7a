use std::collections::BTreeMap;

use serde::Serialize;

use crate::bidding::{adjust_electricity_position, AdjustedElectricityPosition, BidLadder};
use crate::solver::SolverContext;
use crate::system::{Case, UnitId};
use crate::uc::CommitmentPlan;

use super::{clear_electricity, clear_heat, MarketError, MarketOutcome};

/// Wind left unused, per farm and period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curtailment {
    pub available: BTreeMap<UnitId, Vec<f64>>,
    pub curtailed: BTreeMap<UnitId, Vec<f64>>,
}

impl Curtailment {
    pub fn period_available(&self, t: usize) -> f64 {
        self.available.values().map(|v| v[t]).sum()
    }

    pub fn period_curtailed(&self, t: usize) -> f64 {
        self.curtailed.values().map(|v| v[t]).sum()
    }

    pub fn total_available(&self) -> f64 {
        self.available.values().flatten().sum()
    }

    pub fn total_curtailed(&self) -> f64 {
        self.curtailed.values().flatten().sum()
    }

    /// Curtailment as a percentage of available wind; 0 without wind.
    pub fn percent(&self) -> f64 {
        let avail = self.total_available();
        if avail > 0.0 {
            100.0 * self.total_curtailed() / avail
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialResult {
    pub plan: CommitmentPlan,
    pub heat: MarketOutcome,
    pub positions: Vec<AdjustedElectricityPosition>,
    pub electricity: MarketOutcome,
    pub curtailment: Curtailment,
}

impl SequentialResult {
    /// Realized price at `unit`'s electricity bus.
    pub fn lmp_at(&self, bus: &str, t: usize) -> f64 {
        self.electricity.price(bus, t)
    }
}

/// Clear heat under `plan`, derive CHP and heat-pump positions from the heat
/// dispatch, then clear electricity.
pub fn run_sequential(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    plan: &CommitmentPlan,
) -> Result<SequentialResult, MarketError> {
    let heat = clear_heat(ctx, case, bids, plan)?;
    let mut positions = Vec::new();
    for (u, up) in case.heat_units().into_iter().zip(&plan.units) {
        if !u.is_coupled() {
            continue;
        }
        let q = &heat.dispatch[u.id()];
        positions.push(adjust_electricity_position(u, q, &up.on)?);
    }
    let electricity = clear_electricity(ctx, case, &positions)?;
    let mut available = BTreeMap::new();
    let mut curtailed = BTreeMap::new();
    for w in &case.wind {
        let used = &electricity.dispatch[&w.id];
        let cut = w
            .available
            .iter()
            .zip(used)
            .map(|(a, u)| super::clean((a - u).max(0.0)))
            .collect();
        available.insert(w.id.clone(), w.available.clone());
        curtailed.insert(w.id.clone(), cut);
    }
    Ok(SequentialResult {
        plan: plan.clone(),
        heat,
        positions,
        electricity,
        curtailment: Curtailment {
            available,
            curtailed,
        },
    })
}
