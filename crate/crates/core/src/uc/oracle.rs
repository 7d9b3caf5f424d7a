use rayon::prelude::*;
use serde::Serialize;

use crate::bidding::{BidLadder, MarginalHeatCostCurve};
use crate::market::{run_sequential, MarketError};
use crate::solver::SolverContext;
use crate::system::Case;

use super::plan::{unit_commitment_cost, unit_schedules};
use super::{CommitmentPlan, UcError, UnitPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OracleMode {
    /// Weighted heat and electricity cost over plans whose realized prices
    /// keep every selected block valid.
    Aware { gamma: f64 },
    /// Commitment plus heat cost, no validity filter.
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub plan: CommitmentPlan,
    pub objective: f64,
    /// Commitment plus heat dispatch cost of the best plan.
    pub heat_cost: f64,
    pub electricity_cost: f64,
    /// Best objective among the other admissible plans.
    pub runner_up: Option<f64>,
    pub plans: u64,
    pub admissible: u64,
}

impl OracleResult {
    /// Whether the runner-up trails by more than `rel` relative.
    pub fn is_unique(&self, rel: f64) -> bool {
        self.runner_up
            .is_none_or(|r| r - self.objective > rel * self.objective.abs().max(1.0))
    }
}

/// Outcome of clearing one period under one joint block selection.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PeriodState {
    pub feasible: bool,
    pub valid: bool,
    pub heat: f64,
    pub electricity: f64,
}

/// Every joint block selection of every period, cleared in isolation.
/// State `s` of period `t` sits at `table[t * states + s]`; unit `j` has
/// `s / stride_j % radix[j]` blocks selected.
pub(crate) struct PeriodTable {
    pub radix: Vec<usize>,
    pub states: usize,
    pub table: Vec<PeriodState>,
}

impl PeriodTable {
    /// Joint states per period.
    pub fn states_of(case: &Case) -> u128 {
        case.heat_units()
            .iter()
            .map(|u| u.block_shares().len() as u128 + 1)
            .product()
    }

    /// Blocks selected for each unit in state `s`.
    pub fn decode(&self, mut s: usize) -> Vec<usize> {
        self.radix
            .iter()
            .map(|&r| {
                let k = s % r;
                s /= r;
                k
            })
            .collect()
    }
}

pub(crate) fn period_table(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
) -> Result<PeriodTable, UcError> {
    let n = case.horizon.len;
    let units = case.heat_units();
    let radix: Vec<usize> = units.iter().map(|u| u.block_shares().len() + 1).collect();
    let states: usize = radix.iter().product();
    let jobs: Vec<(usize, usize)> = (0..n)
        .flat_map(|t| (0..states).map(move |s| (t, s)))
        .collect();
    let windows: Vec<(Case, Vec<BidLadder>)> = (0..n)
        .map(|t| {
            let w = case.window(t..t + 1);
            let b = bids
                .iter()
                .map(|l| BidLadder {
                    periods: l.periods[t..t + 1].to_vec(),
                    ..l.clone()
                })
                .collect();
            (w, b)
        })
        .collect();
    let table = jobs
        .par_iter()
        .map(|&(t, s)| period_state(ctx, &windows[t].0, &windows[t].1, &radix, s))
        .collect::<Result<_, _>>()?;
    Ok(PeriodTable {
        radix,
        states,
        table,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Best {
    best: Option<(f64, u64)>,
    second: Option<f64>,
}

impl Best {
    fn push(mut self, obj: f64, idx: u64) -> Self {
        match self.best {
            Some((b, i)) if b.total_cmp(&obj).then(i.cmp(&idx)).is_le() => {
                self.second = Some(self.second.map_or(obj, |s| s.min(obj)));
            }
            Some((b, _)) => {
                self.second = Some(self.second.map_or(b, |s| s.min(b)));
                self.best = Some((obj, idx));
            }
            None => self.best = Some((obj, idx)),
        }
        self
    }

    fn merge(self, other: Best) -> Best {
        let mut out = match other.best {
            Some((o, i)) => self.push(o, i),
            None => self,
        };
        if let Some(s) = other.second {
            out.second = Some(out.second.map_or(s, |x| x.min(s)));
        }
        out
    }
}

/// Clear every commitment plan and keep the cheapest admissible one.
///
/// Markets carry no intertemporal coupling, so each period is cleared once per
/// joint block selection and plans are scored by summation.
pub fn enumerate_oracle(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    mode: OracleMode,
    budget: u64,
) -> Result<OracleResult, UcError> {
    if let OracleMode::Aware { gamma } = mode {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(UcError::Gamma(gamma));
        }
    }
    let n = case.horizon.len;
    let units = case.heat_units();
    let schedules: Vec<Vec<UnitPlan>> = units.iter().map(|u| unit_schedules(*u, n)).collect();
    let plans: u128 = schedules.iter().map(|s| s.len() as u128).product();
    if plans > u128::from(budget) {
        return Err(UcError::Budget { plans, budget });
    }
    let plans = plans as u64;

    let PeriodTable {
        radix,
        states,
        table,
    } = period_table(ctx, case, bids)?;
    let costs: Vec<Vec<f64>> = units
        .iter()
        .zip(&schedules)
        .map(|(u, ss)| {
            ss.iter()
                .map(|p| unit_commitment_cost(u.uc(), p, case.settings.block_selection_cost))
                .collect()
        })
        .collect();
    let stride: Vec<usize> = radix
        .iter()
        .scan(1, |acc, &r| {
            let s = *acc;
            *acc *= r;
            Some(s)
        })
        .collect();
    let decode = |mut idx: u64| -> Vec<usize> {
        schedules
            .iter()
            .map(|s| {
                let k = (idx % s.len() as u64) as usize;
                idx /= s.len() as u64;
                k
            })
            .collect()
    };
    let score = |pick: &[usize]| -> Option<(f64, f64, f64)> {
        let mut commit = 0.0;
        for (j, &k) in pick.iter().enumerate() {
            commit += costs[j][k];
        }
        let (mut heat, mut elec) = (commit, 0.0);
        for t in 0..n {
            let s: usize = pick
                .iter()
                .enumerate()
                .map(|(j, &k)| schedules[j][k].blocks[t] * stride[j])
                .sum();
            let st = &table[t * states + s];
            if !st.feasible || (matches!(mode, OracleMode::Aware { .. }) && !st.valid) {
                return None;
            }
            heat += st.heat;
            elec += st.electricity;
        }
        let obj = match mode {
            OracleMode::Aware { gamma } => gamma * heat + (1.0 - gamma) * elec,
            OracleMode::Decoupled => heat,
        };
        Some((obj, heat, elec))
    };

    let (best, admissible) = (0..plans)
        .into_par_iter()
        .fold(
            || (Best::default(), 0u64),
            |(b, a), idx| match score(&decode(idx)) {
                Some((obj, _, _)) => (b.push(obj, idx), a + 1),
                None => (b, a),
            },
        )
        .reduce(
            || (Best::default(), 0),
            |(x, a), (y, b)| (x.merge(y), a + b),
        );

    let (objective, idx) = best.best.ok_or(UcError::Infeasible)?;
    let pick = decode(idx);
    let (_, heat_cost, electricity_cost) = score(&pick).expect("admissible");
    Ok(OracleResult {
        plan: CommitmentPlan {
            units: pick
                .iter()
                .enumerate()
                .map(|(j, &k)| schedules[j][k].clone())
                .collect(),
            pipe_delays: vec![0; case.heat.pipes.len()],
        },
        objective,
        heat_cost,
        electricity_cost,
        runner_up: best.second,
        plans,
        admissible,
    })
}

fn period_state(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    radix: &[usize],
    mut s: usize,
) -> Result<PeriodState, UcError> {
    let units = case.heat_units();
    let mut plan = CommitmentPlan::all_off(case);
    for (p, &r) in plan.units.iter_mut().zip(radix) {
        let k = s % r;
        s /= r;
        p.on[0] = k > 0;
        p.blocks[0] = k;
    }
    let seq = match run_sequential(ctx, case, bids, &plan) {
        Ok(seq) => seq,
        Err(MarketError::Infeasible { .. }) => {
            return Ok(PeriodState {
                feasible: false,
                valid: false,
                heat: 0.0,
                electricity: 0.0,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut valid = true;
    for ((u, ladder), p) in units.iter().zip(bids).zip(&plan.units) {
        let Some(bus) = u.node_power() else { continue };
        let curve = MarginalHeatCostCurve::for_unit(*u);
        let floor = curve.eval(seq.lmp_at(&bus.0, 0)) - ctx.tol.validity;
        valid &= ladder.blocks(0)[..p.blocks[0]]
            .iter()
            .all(|b| b.price >= floor);
    }
    let self_commit: f64 = case
        .chps
        .iter()
        .filter_map(|c| {
            let pos = seq.positions.iter().find(|p| p.unit == c.id)?;
            Some(c.marginal_power_cost() * pos.periods[0].self_commit)
        })
        .sum();
    Ok(PeriodState {
        feasible: true,
        valid,
        heat: seq.heat.objective,
        electricity: seq.electricity.objective + self_commit,
    })
}
