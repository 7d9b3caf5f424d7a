use serde::Serialize;

use crate::bidding::BidLadder;
use crate::market::{clear_heat, MarketOutcome};
use crate::solver::{MilpOptions, SolveStatus, SolverContext};
use crate::system::Case;

use super::{CommitmentPlan, CompactModel, UcError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoupledSolution {
    pub plan: CommitmentPlan,
    pub heat: MarketOutcome,
    /// No-load, start-up and block-selection cost.
    pub commitment_cost: f64,
    /// Commitment plus heat dispatch cost.
    pub objective: f64,
    pub gap: Option<f64>,
    pub max_envelope_error: f64,
}

/// Commit heat units against the heat market alone, then clear heat at the
/// chosen plan.
pub fn solve_decoupled_uc(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    opts: &MilpOptions,
) -> Result<DecoupledSolution, UcError> {
    let cm = CompactModel::build(case, bids, ctx.tol.tie_break);
    let f = cm.decoupled_milp();
    let rep = ctx.solve_milp(
        &f.model,
        &MilpOptions {
            with_duals: true,
            ..*opts
        },
    )?;
    let pipes = case.heat.pipes.len();
    match rep.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(UcError::Infeasible),
        SolveStatus::Unbounded => return Err(UcError::Infeasible),
        SolveStatus::Limit => {
            let incumbent = rep
                .has_primal()
                .then(|| Box::new(cm.plan_of_z(&f.values(&f.z, &rep.primal), pipes)));
            return Err(UcError::Limit {
                incumbent,
                gap: rep.gap,
            });
        }
    }
    let max_envelope_error = f.max_envelope_error(&rep.primal);
    if max_envelope_error > ctx.tol.mccormick {
        return Err(UcError::McCormick(max_envelope_error));
    }
    let plan = cm.plan_of_z(&f.values(&f.z, &rep.primal), pipes);
    let heat = clear_heat(ctx, case, bids, &plan)?;
    let commitment_cost = plan.commitment_cost(case);
    Ok(DecoupledSolution {
        objective: commitment_cost + heat.objective,
        plan,
        heat,
        commitment_cost,
        gap: rep.gap,
        max_envelope_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidding::build_case_heat_bids;
    use crate::market::testcase::small_case;

    #[test]
    fn single_heat_only_unit_runs_when_needed() {
        let mut c = small_case();
        c.chps.clear();
        c.heat_pumps.clear();
        c.foreseen_lmps.clear();
        c.heat.pipes.clear();
        c.heat.nodes.retain(|n| n.0 == "h2");
        c.heat.load.retain(|n, _| n.0 == "h2");
        c.heat.load.get_mut(&"h2".into()).unwrap()[1] = 0.0;
        c.heat_only[0].uc.startup_cost = 0.0;
        let bids = build_case_heat_bids(&c).unwrap();
        let sol = solve_decoupled_uc(
            &SolverContext::default(),
            &c,
            &bids,
            &MilpOptions::default(),
        )
        .unwrap();
        let p = &sol.plan.units[0];
        assert_eq!(p.on, vec![true, false, true, true]);
    }
}
