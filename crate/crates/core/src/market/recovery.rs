use serde::Serialize;

use crate::bidding::MarginalHeatCostCurve;
use crate::system::{Case, UnitId};

use super::SequentialResult;

/// Accepted heat below this is treated as not dispatched.
const ACCEPTED_MIN: f64 = 1e-7;

/// Cost recovery of one unit in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryEntry {
    pub unit: UnitId,
    pub period: usize,
    /// Realized price at the unit's bus.
    pub lmp: f64,
    /// Marginal heat cost at `lmp`.
    pub marginal_cost: f64,
    /// Highest-priced accepted block, if any heat was sold.
    pub bid_price: Option<f64>,
    pub accepted: f64,
    /// Accepted blocks priced below marginal cost.
    pub invalid_blocks: usize,
    /// Sum of (marginal cost - price) * accepted; positive means a loss.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub entries: Vec<RecoveryEntry>,
}

impl RecoveryReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().map(|e| e.invalid_blocks).sum()
    }

    pub fn invalid(&self) -> impl Iterator<Item = &RecoveryEntry> {
        self.entries.iter().filter(|e| e.invalid_blocks > 0)
    }

    /// Loss per unit over the horizon, in unit-id order.
    pub fn unit_losses(&self) -> Vec<(UnitId, f64)> {
        let mut out: Vec<(UnitId, f64)> = Vec::new();
        for e in &self.entries {
            match out.last_mut() {
                Some((u, l)) if *u == e.unit => *l += e.loss,
                _ => out.push((e.unit.clone(), e.loss)),
            }
        }
        out
    }
}

/// Flag accepted heat blocks of CHPs and heat pumps whose price falls short
/// of the marginal heat cost at the realized electricity price.
pub fn check_cost_recovery(case: &Case, seq: &SequentialResult, tol: f64) -> RecoveryReport {
    let mut entries = Vec::new();
    for u in case.heat_units().into_iter().filter(|u| u.is_coupled()) {
        let curve = MarginalHeatCostCurve::for_unit(u);
        let bus = u.node_power().expect("coupled unit");
        for t in case.horizon.periods() {
            let lmp = seq.lmp_at(&bus.0, t);
            let gamma = curve.eval(lmp);
            let mut e = RecoveryEntry {
                unit: u.id().clone(),
                period: t,
                lmp,
                marginal_cost: gamma,
                bid_price: None,
                accepted: 0.0,
                invalid_blocks: 0,
                loss: 0.0,
            };
            for b in seq
                .heat
                .blocks
                .iter()
                .filter(|b| &b.unit == u.id() && b.period == t && b.accepted > ACCEPTED_MIN)
            {
                e.bid_price = Some(e.bid_price.map_or(b.price, |p: f64| p.max(b.price)));
                e.accepted += b.accepted;
                e.loss += (gamma - b.price) * b.accepted;
                if b.price < gamma - tol {
                    e.invalid_blocks += 1;
                }
            }
            entries.push(e);
        }
    }
    RecoveryReport { entries }
}
