//! Day-ahead heat and electricity clearings, run one after the other.
//!
//! Three ways of chaining the two markets are conceivable: (a) electricity
//! first with heat bids adjusted afterwards, (b) a joint clearing, and (c) heat
//! first, with the heat dispatch fixing CHP and heat-pump positions in the
//! electricity market. Only (c) is implemented ([`run_sequential`]); under
//! unique optima the three coincide.

mod electricity;
mod heat;
mod recovery;
mod sequential;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bidding::{BiddingError, Market};
use crate::solver::{LpOptimality, SolverError};
use crate::system::UnitId;

pub use electricity::clear_electricity;
pub(crate) use electricity::{electricity_ranks, max_electricity_blocks};
pub use heat::clear_heat;
pub(crate) use heat::heat_tie_rank;
pub use recovery::{check_cost_recovery, RecoveryEntry, RecoveryReport};
pub use sequential::{run_sequential, Curtailment, SequentialResult};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{market:?} market infeasible in period {period}{}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Infeasible {
        market: Market,
        period: usize,
        location: Option<String>,
    },
    #[error("{0:?} market clearing is unbounded")]
    Unbounded(Market),
    #[error("{0:?} market clearing stopped at a solver limit")]
    Limit(Market),
    #[error("invalid commitment plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One offered block and how much of it cleared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockAcceptance {
    pub unit: UnitId,
    pub block: usize,
    pub period: usize,
    pub price: f64,
    pub quantity: f64,
    pub accepted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketOutcome {
    pub market: Market,
    pub blocks: Vec<BlockAcceptance>,
    /// Heat output per heat unit, or electricity output per generator
    /// (including CHP self-commitment).
    pub dispatch: BTreeMap<UnitId, Vec<f64>>,
    /// Heat-pump electricity consumption (electricity market only).
    pub consumption: BTreeMap<UnitId, Vec<f64>>,
    /// Balance-row dual per node and period.
    pub prices: BTreeMap<String, Vec<f64>>,
    /// Net flow per line or pipe, in its from-to direction.
    pub flows: BTreeMap<String, Vec<f64>>,
    /// Energy lost in transit per period.
    pub losses: Vec<f64>,
    /// Sum of price times accepted quantity, without tie-break terms.
    pub objective: f64,
    #[serde(skip)]
    pub optimality: LpOptimality,
}

impl MarketOutcome {
    pub fn price(&self, node: &str, t: usize) -> f64 {
        self.prices[node][t]
    }

    pub fn dispatch_of(&self, unit: &UnitId) -> Option<&[f64]> {
        self.dispatch.get(unit).map(Vec::as_slice)
    }

    /// Objective restricted to period `t`.
    pub fn period_objective(&self, t: usize) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.period == t)
            .map(|b| b.price * b.accepted)
            .sum()
    }

    pub fn periods(&self) -> usize {
        self.losses.len()
    }
}

/// Small helper shared by the two clearings: strip solver noise from a value
/// that should sit on a bound.
pub(crate) fn clean(v: f64) -> f64 {
    if v.abs() < 1e-10 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
pub(crate) mod testcase;
