use std::collections::BTreeMap;

use crate::bidding::{BidLadder, Market};
use crate::solver::{check_lp_optimality, Model, Sense, SolveStatus, SolverContext, VarId};
use crate::system::{Case, HeatNodeId};
use crate::uc::CommitmentPlan;

use super::{clean, BlockAcceptance, MarketError, MarketOutcome};

struct HeatLp {
    model: Model,
    /// (ladder index, block, period, var) for offered blocks.
    blocks: Vec<(usize, usize, usize, VarId)>,
    /// Forward and backward arc per pipe and period.
    arcs: Vec<Vec<(VarId, VarId)>>,
    balance: BTreeMap<(HeatNodeId, usize), crate::solver::RowId>,
}

/// Position of block `b` of unit `j` in the heat tie-break order.
pub(crate) fn heat_tie_rank(j: usize, b: usize, width: usize) -> f64 {
    (j * width + b) as f64
}

fn build(
    case: &Case,
    bids: &[BidLadder],
    plan: &CommitmentPlan,
    periods: &[usize],
    tie: f64,
) -> HeatLp {
    let mut m = Model::new();
    let max_blocks = bids.iter().map(BidLadder::num_blocks).max().unwrap_or(1);
    let units = case.heat_units();
    let mut blocks = Vec::new();
    let mut injections: BTreeMap<(HeatNodeId, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    for (j, (ladder, (unit, up))) in bids.iter().zip(units.iter().zip(&plan.units)).enumerate() {
        for &t in periods {
            for (b, blk) in ladder.blocks(t).iter().enumerate() {
                if !up.is_selected(t, b) {
                    continue;
                }
                let cost = blk.price + tie * heat_tie_rank(j, b, max_blocks);
                let v = m.add_var(
                    format!("s_{}_{b}_{t}", ladder.unit),
                    0.0,
                    blk.quantity,
                    cost,
                );
                blocks.push((j, b, t, v));
                injections
                    .entry((unit.node_heat().clone(), t))
                    .or_default()
                    .push((v, 1.0));
            }
        }
    }
    let mut arcs = vec![Vec::new(); case.heat.pipes.len()];
    for (k, pipe) in case.heat.pipes.iter().enumerate() {
        for &t in periods {
            let fwd = m.add_var(format!("f+_{}_{t}", pipe.id), 0.0, pipe.capacity, 0.0);
            let bwd = m.add_var(format!("f-_{}_{t}", pipe.id), 0.0, pipe.capacity, 0.0);
            let kept = 1.0 - pipe.loss;
            let inj = &mut injections;
            inj.entry((pipe.from.clone(), t))
                .or_default()
                .extend([(fwd, -1.0), (bwd, kept)]);
            inj.entry((pipe.to.clone(), t))
                .or_default()
                .extend([(fwd, kept), (bwd, -1.0)]);
            arcs[k].push((fwd, bwd));
        }
    }
    let mut balance = BTreeMap::new();
    for &t in periods {
        for node in &case.heat.nodes {
            let key = (node.clone(), t);
            let terms = injections.remove(&key).unwrap_or_default();
            let row = m.add_row(
                format!("heat_{node}_{t}"),
                terms,
                Sense::Eq,
                case.heat.load_at(node, t),
            );
            balance.insert(key, row);
        }
    }
    HeatLp {
        model: m,
        blocks,
        arcs,
        balance,
    }
}

/// Name the node whose load cannot be met from local blocks plus full imports.
fn diagnose(case: &Case, bids: &[BidLadder], plan: &CommitmentPlan, t: usize) -> Option<String> {
    let units = case.heat_units();
    case.heat.nodes.iter().find_map(|node| {
        let local: f64 = units
            .iter()
            .zip(bids.iter().zip(&plan.units))
            .filter(|(u, _)| u.node_heat() == node)
            .map(|(_, (l, p))| {
                l.blocks(t)[..p.blocks[t]]
                    .iter()
                    .map(|b| b.quantity)
                    .sum::<f64>()
            })
            .sum();
        let import: f64 = case
            .heat
            .pipes
            .iter()
            .filter(|p| &p.from == node || &p.to == node)
            .map(|p| p.capacity * (1.0 - p.loss))
            .sum();
        (local + import < case.heat.load_at(node, t)).then(|| format!("heat node {node}"))
    })
}

/// Optimal heat flow over the blocks that `plan` offers.
pub fn clear_heat(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    plan: &CommitmentPlan,
) -> Result<MarketOutcome, MarketError> {
    let issues = plan.violations(case);
    if let Some(first) = issues.first() {
        return Err(MarketError::Plan(first.clone()));
    }
    let all: Vec<usize> = case.horizon.periods().collect();
    let lp = build(case, bids, plan, &all, ctx.tol.tie_break);
    let rep = ctx.solve_lp(&lp.model)?;
    match rep.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            for &t in &all {
                let single = build(case, bids, plan, &[t], ctx.tol.tie_break);
                if ctx.solve_lp(&single.model)?.status == SolveStatus::Infeasible {
                    return Err(MarketError::Infeasible {
                        market: Market::Heat,
                        period: t,
                        location: diagnose(case, bids, plan, t),
                    });
                }
            }
            return Err(MarketError::Infeasible {
                market: Market::Heat,
                period: 0,
                location: None,
            });
        }
        SolveStatus::Unbounded => return Err(MarketError::Unbounded(Market::Heat)),
        SolveStatus::Limit => return Err(MarketError::Limit(Market::Heat)),
    }
    let n = case.horizon.len;
    let optimality = check_lp_optimality(&lp.model, &rep).expect("LP duals");

    let mut accepted: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for &(j, b, t, v) in &lp.blocks {
        accepted.insert((j, b, t), clean(rep.value(v)));
    }
    let mut blocks = Vec::new();
    let mut dispatch = BTreeMap::new();
    let mut objective = 0.0;
    for (j, ladder) in bids.iter().enumerate() {
        let mut q = vec![0.0; n];
        for (t, qt) in q.iter_mut().enumerate() {
            for (b, blk) in ladder.blocks(t).iter().enumerate() {
                let a = accepted.get(&(j, b, t)).copied().unwrap_or(0.0);
                *qt += a;
                objective += blk.price * a;
                blocks.push(BlockAcceptance {
                    unit: ladder.unit.clone(),
                    block: b,
                    period: t,
                    price: blk.price,
                    quantity: blk.quantity,
                    accepted: a,
                });
            }
        }
        dispatch.insert(ladder.unit.clone(), q);
    }
    let mut flows = BTreeMap::new();
    let mut losses = vec![0.0; n];
    for (pipe, arcs) in case.heat.pipes.iter().zip(&lp.arcs) {
        let f: Vec<f64> = arcs
            .iter()
            .enumerate()
            .map(|(t, &(fwd, bwd))| {
                let (a, b) = (rep.value(fwd), rep.value(bwd));
                losses[t] += pipe.loss * (a + b);
                clean(a - b)
            })
            .collect();
        flows.insert(pipe.id.clone(), f);
    }
    let mut prices: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((node, t), row) in &lp.balance {
        prices.entry(node.0.clone()).or_insert_with(|| vec![0.0; n])[*t] =
            clean(rep.dual(*row).expect("LP duals"));
    }
    Ok(MarketOutcome {
        market: Market::Heat,
        blocks,
        dispatch,
        consumption: BTreeMap::new(),
        prices,
        flows,
        losses,
        objective,
        optimality,
    })
}
