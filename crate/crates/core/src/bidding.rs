//! Heat bids priced from electricity prices, and the electricity positions a
//! heat dispatch forces on CHPs and heat pumps.

use serde::Serialize;
use thiserror::Error;

use crate::system::{Block, BusId, Case, HeatUnit, UnitId};

#[derive(Debug, Error, PartialEq)]
pub enum BiddingError {
    #[error("unknown heat unit `{0}`")]
    UnknownUnit(UnitId),
    #[error("unit `{0}` has an empty block specification")]
    EmptyBlockSpec(UnitId),
    #[error("unit `{unit}` needs {needed} foreseen prices, got {got}")]
    ProfileLength {
        unit: UnitId,
        needed: usize,
        got: usize,
    },
    #[error("unit `{unit}` period {period}: heat output {heat} outside capability")]
    OutsideCapability {
        unit: UnitId,
        period: usize,
        heat: f64,
    },
    #[error("unit `{0}` does not trade electricity")]
    NotCoupled(UnitId),
}

/// `slope * lambda + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinePiece {
    /// The slope is `rate / per`, kept as a ratio so that `eval` divides
    /// last and a heat pump's value is exactly `lambda / cop`.
    pub rate: f64,
    pub per: f64,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Self {
            rate: slope,
            per: 1.0,
            intercept,
        }
    }

    pub fn slope(&self) -> f64 {
        self.rate / self.per
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.rate * lambda / self.per + self.intercept
    }
}

/// Convex piecewise-linear marginal heat cost as a function of the local
/// electricity price: the pointwise max of its pieces. Unit parameters are
/// time invariant, so one curve serves every period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalHeatCostCurve {
    pub unit: UnitId,
    pub pieces: Vec<AffinePiece>,
}

impl MarginalHeatCostCurve {
    pub fn for_unit(unit: HeatUnit<'_>) -> Self {
        let pieces = match unit {
            HeatUnit::HeatPump(hp) => vec![AffinePiece {
                rate: 1.0,
                per: hp.cop,
                intercept: 0.0,
            }],
            HeatUnit::Chp(c) => vec![
                // minimum power-to-heat ratio binding
                AffinePiece::new(-c.r, c.fuel_cost * (c.rho_h + c.r * c.rho_e)),
                // fuel cap binding: heat displaces electricity
                AffinePiece {
                    rate: c.rho_h,
                    per: c.rho_e,
                    intercept: 0.0,
                },
            ],
            HeatUnit::HeatOnly(h) => vec![AffinePiece::new(0.0, h.marginal_cost)],
        };
        Self {
            unit: unit.id().clone(),
            pieces,
        }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(lambda))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest value over `lo..=hi`; the max of a convex function sits at an end.
    pub fn max_over(&self, lo: f64, hi: f64) -> f64 {
        self.eval(lo).max(self.eval(hi))
    }
}

/// Marginal heat cost of `unit` at price `lambda`.
pub fn marginal_heat_cost(case: &Case, unit: &UnitId, lambda: f64) -> Result<f64, BiddingError> {
    let u = case
        .heat_unit(unit)
        .ok_or_else(|| BiddingError::UnknownUnit(unit.clone()))?;
    Ok(MarginalHeatCostCurve::for_unit(u).eval(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Heat,
    Electricity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidLadder {
    pub unit: UnitId,
    pub market: Market,
    /// `periods[t]` lists blocks in nondecreasing price order.
    pub periods: Vec<Vec<Block>>,
}

impl BidLadder {
    pub fn blocks(&self, t: usize) -> &[Block] {
        &self.periods[t]
    }

    pub fn num_blocks(&self) -> usize {
        self.periods.first().map_or(0, Vec::len)
    }

    pub fn is_sorted(&self) -> bool {
        self.periods
            .iter()
            .all(|p| p.windows(2).all(|w| w[0].price <= w[1].price))
    }
}

/// Heat ladder of one unit: every block of period `t` is priced at the
/// marginal heat cost at the foreseen price of `t`; quantities follow the
/// unit's block shares of its maximum heat output.
pub fn build_heat_bids(unit: HeatUnit<'_>, foreseen: &[f64]) -> Result<BidLadder, BiddingError> {
    let shares = unit.block_shares();
    if shares.is_empty() {
        return Err(BiddingError::EmptyBlockSpec(unit.id().clone()));
    }
    let curve = MarginalHeatCostCurve::for_unit(unit);
    let q_max = unit.q_max();
    let periods = foreseen
        .iter()
        .map(|&lambda| {
            let price = curve.eval(lambda);
            shares
                .iter()
                .map(|s| Block {
                    price,
                    quantity: s * q_max,
                })
                .collect()
        })
        .collect();
    Ok(BidLadder {
        unit: unit.id().clone(),
        market: Market::Heat,
        periods,
    })
}

/// Heat ladders of every heat unit of the case, in unit-id order.
pub fn build_case_heat_bids(case: &Case) -> Result<Vec<BidLadder>, BiddingError> {
    let n = case.horizon.len;
    case.heat_units()
        .into_iter()
        .map(|u| {
            let foreseen = if u.is_coupled() {
                let p =
                    case.foreseen_lmps
                        .get(u.id())
                        .ok_or_else(|| BiddingError::ProfileLength {
                            unit: u.id().clone(),
                            needed: n,
                            got: 0,
                        })?;
                if p.len() != n {
                    return Err(BiddingError::ProfileLength {
                        unit: u.id().clone(),
                        needed: n,
                        got: p.len(),
                    });
                }
                p.clone()
            } else {
                vec![0.0; n]
            };
            build_heat_bids(u, &foreseen)
        })
        .collect()
}

/// Electricity a heat unit must trade in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionPeriod {
    /// Price-inelastic injection: positive for CHP minimum output, negative
    /// for heat-pump consumption.
    pub self_commit: f64,
    /// Price-elastic blocks above the self-commitment.
    pub flexible: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedElectricityPosition {
    pub unit: UnitId,
    pub bus: BusId,
    pub periods: Vec<PositionPeriod>,
}

const CAPABILITY_TOL: f64 = 1e-7;

/// Electricity position implied by the heat dispatch `heat[t]` under
/// commitment `on[t]`.
pub fn adjust_electricity_position(
    unit: HeatUnit<'_>,
    heat: &[f64],
    on: &[bool],
) -> Result<AdjustedElectricityPosition, BiddingError> {
    let outside = |t: usize| BiddingError::OutsideCapability {
        unit: unit.id().clone(),
        period: t,
        heat: heat[t],
    };
    let periods = match unit {
        HeatUnit::HeatOnly(h) => return Err(BiddingError::NotCoupled(h.id.clone())),
        HeatUnit::HeatPump(hp) => heat
            .iter()
            .enumerate()
            .map(|(t, &q)| {
                let cap = if on[t] { hp.q_max } else { 0.0 };
                if q < -CAPABILITY_TOL || q > cap + CAPABILITY_TOL {
                    return Err(outside(t));
                }
                Ok(PositionPeriod {
                    self_commit: -q.max(0.0) / hp.cop,
                    flexible: vec![],
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
        HeatUnit::Chp(c) => heat
            .iter()
            .enumerate()
            .map(|(t, &q)| {
                let q_cl = q.clamp(0.0, c.q_max());
                if (q - q_cl).abs() > CAPABILITY_TOL {
                    return Err(outside(t));
                }
                let (lo, hi) = c.power_range(q_cl, on[t]).ok_or_else(|| outside(t))?;
                let flex = hi - lo;
                Ok(PositionPeriod {
                    self_commit: lo,
                    flexible: if on[t] && flex > 0.0 {
                        vec![Block {
                            price: c.marginal_power_cost(),
                            quantity: flex,
                        }]
                    } else {
                        vec![]
                    },
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(AdjustedElectricityPosition {
        unit: unit.id().clone(),
        bus: unit.node_power().expect("coupled unit").clone(),
        periods,
    })
}
