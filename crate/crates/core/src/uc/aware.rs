use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bidding::{BidLadder, MarginalHeatCostCurve};
use crate::market::{run_sequential, SequentialResult};
use crate::solver::{
    lp_format, MilpOptions, Model, Sense, SolveReport, SolveStatus, SolverContext, Tolerances,
    VarId,
};
use crate::system::{Case, UnitId};

use super::compact::Part;
use super::oracle::{period_table, PeriodTable};
use super::{CommitmentPlan, CompactModel, DualBounds, Formulation, UcError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwareOptions {
    pub gamma: f64,
    pub milp: MilpOptions,
    /// Times the dual bounds may grow tenfold before giving up.
    pub escalations: usize,
    /// Largest number of joint block selections per period for which every
    /// selection is cleared up front and the problem is lifted onto them.
    /// Zero disables the lifting.
    pub lift_states: u64,
}

impl Default for AwareOptions {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            milp: MilpOptions::default(),
            escalations: 3,
            lift_states: 4096,
        }
    }
}

/// The single-level problem together with the data needed to read it back.
#[derive(Debug, Clone)]
pub struct AwareMilp {
    pub gamma: f64,
    pub bounds: DualBounds,
    pub validity_tol: f64,
    pub compact: CompactModel,
    pub formulation: Formulation,
    /// Per-period state lifting added on top of the formulation.
    pub lifting: Option<Vec<PeriodStates>>,
}

/// Admissible joint block selections of one period, each with its share of
/// the merged objective.
pub type PeriodStates = Vec<(Vec<usize>, f64)>;

impl AwareMilp {
    pub fn with_bounds(&self, bounds: DualBounds) -> Self {
        let mut out = Self {
            bounds,
            formulation: self
                .compact
                .aware_milp(self.gamma, bounds, self.validity_tol),
            lifting: None,
            ..self.clone()
        };
        if let Some(l) = &self.lifting {
            out.lift(l.clone());
        }
        out
    }

    /// Tie the commitment of each period to a convex combination of its
    /// admissible joint selections and bound the period's merged cost from
    /// below by the matching combination of their costs.
    pub fn lift(&mut self, periods: Vec<PeriodStates>) {
        let cm = &self.compact;
        let f = &mut self.formulation;
        for (t, states) in periods.iter().enumerate() {
            let lam: Vec<VarId> = (0..states.len())
                .map(|s| f.model.add_var(format!("lam_{t}_{s}"), 0.0, 1.0, 0.0))
                .collect();
            f.model.add_row(
                format!("convex_{t}"),
                lam.iter().map(|&l| (l, 1.0)).collect(),
                Sense::Eq,
                1.0,
            );
            for (j, sel) in cm.select.iter().enumerate() {
                for (b, &zi) in sel[t].iter().enumerate() {
                    let mut terms = vec![(f.z[zi], 1.0)];
                    terms.extend(
                        states
                            .iter()
                            .zip(&lam)
                            .filter(|((k, _), _)| k[j] > b)
                            .map(|(_, &l)| (l, -1.0)),
                    );
                    f.model
                        .add_row(format!("lift_{j}_{b}_{t}"), terms, Sense::Eq, 0.0);
                }
            }
            let mut terms: Vec<(VarId, f64)> = cm
                .period_cost_terms(t, self.gamma)
                .into_iter()
                .map(|(k, a)| (f.x[k], a))
                .collect();
            terms.extend(
                states
                    .iter()
                    .zip(&lam)
                    .map(|((_, v), &l)| (l, -(v - 1e-7 * v.abs().max(1.0)))),
            );
            f.model.add_row(format!("value_{t}"), terms, Sense::Ge, 0.0);
        }
        self.lifting = Some(periods);
    }

    /// The model in LP file format.
    pub fn to_lp(&self) -> String {
        lp_format::write_lp(&self.formulation.model)
    }
}

pub fn build_aware_milp(
    case: &Case,
    bids: &[BidLadder],
    gamma: f64,
    tol: &Tolerances,
) -> Result<AwareMilp, UcError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(UcError::Gamma(gamma));
    }
    let compact = CompactModel::build(case, bids, tol.tie_break);
    let bounds = DualBounds::for_case(case, bids);
    let formulation = compact.aware_milp(gamma, bounds, tol.validity);
    Ok(AwareMilp {
        gamma,
        bounds,
        validity_tol: tol.validity,
        compact,
        formulation,
        lifting: None,
    })
}

/// Each period's joint block selections that clear feasibly in isolation
/// with every selected block valid, with their merged cost at `gamma`.
/// `None` when a period has more than `cap` joint selections.
pub fn period_states(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    cm: &CompactModel,
    gamma: f64,
    cap: u64,
) -> Result<Option<Vec<PeriodStates>>, UcError> {
    if PeriodTable::states_of(case) > u128::from(cap) {
        return Ok(None);
    }
    let pt = period_table(ctx, case, bids)?;
    let jobs: Vec<(usize, usize)> = (0..cm.periods)
        .flat_map(|t| (0..pt.states).map(move |s| (t, s)))
        .filter(|&(t, s)| {
            let st = &pt.table[t * pt.states + s];
            st.feasible && st.valid
        })
        .collect();
    let values: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(t, s)| {
            let m = cm.period_lp(t, gamma, &pt.decode(s));
            let rep = ctx.solve_lp(&m)?;
            Ok(rep.is_optimal().then(|| m.objective(&rep.primal)))
        })
        .collect::<Result<_, UcError>>()?;
    let mut out = vec![Vec::new(); cm.periods];
    for (&(t, s), v) in jobs.iter().zip(values) {
        if let Some(v) = v {
            out[t].push((pt.decode(s), v));
        }
    }
    Ok(Some(out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwareDiagnostics {
    pub max_envelope_error: f64,
    pub strong_duality_gap: f64,
    pub max_violation: f64,
    pub lmp_bound: f64,
    pub escalations: usize,
}

/// Agreement between the single-level solution and a sequential re-clearing
/// at its commitment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consistency {
    pub heat_dispatch: f64,
    pub lmp: f64,
    /// Set when either difference exceeds the consistency tolerance: the heat
    /// market probably has several optima at this commitment.
    pub multiplicity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwareSolution {
    pub gamma: f64,
    pub plan: CommitmentPlan,
    pub heat_dispatch: BTreeMap<UnitId, Vec<f64>>,
    pub heat_primal: Vec<f64>,
    pub electricity_primal: Vec<f64>,
    pub heat_duals: Vec<f64>,
    pub electricity_duals: Vec<f64>,
    /// Balance duals divided by `1 - gamma`, per bus.
    pub lmps: BTreeMap<String, Vec<f64>>,
    pub objective: f64,
    /// `gamma` times commitment plus heat dispatch cost.
    pub weighted_heat_cost: f64,
    /// `1 - gamma` times electricity dispatch cost.
    pub weighted_electricity_cost: f64,
    pub gap: Option<f64>,
    pub diagnostics: AwareDiagnostics,
    pub consistency: Consistency,
    pub sequential: SequentialResult,
}

impl AwareSolution {
    pub fn lmp(&self, bus: &str, t: usize) -> f64 {
        self.lmps[bus][t]
    }
}

/// Solve the electricity-aware commitment, then re-clear both markets at the
/// chosen plan and compare.
pub fn solve_aware(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    opts: &AwareOptions,
) -> Result<AwareSolution, UcError> {
    let mut milp = build_aware_milp(case, bids, opts.gamma, &ctx.tol)?;
    if opts.lift_states > 0 {
        if let Some(p) =
            period_states(ctx, case, bids, &milp.compact, opts.gamma, opts.lift_states)?
        {
            milp.lift(p);
        }
    }
    let mut escalations = 0;
    loop {
        let start =
            repaired_plan(ctx, case, bids, &milp.compact)?.and_then(|p| seed(ctx, case, &milp, &p));
        let (rep, point) = solve_once(
            ctx,
            &milp,
            &opts.milp,
            case.heat.pipes.len(),
            start.as_deref(),
        )?;
        match dual_at_bound(&milp.formulation, &point) {
            Some((name, _)) if escalations < opts.escalations => {
                log::info!("dual `{name}` at its bound, widening dual bounds");
                escalations += 1;
                milp = milp.with_bounds(milp.bounds.scaled(10.0));
            }
            Some((name, bound)) => {
                return Err(UcError::DualBound {
                    name,
                    bound,
                    escalations,
                })
            }
            None => return finish(ctx, case, bids, &milp, &rep, &point, escalations),
        }
    }
}

fn solve_once(
    ctx: &SolverContext,
    milp: &AwareMilp,
    opts: &MilpOptions,
    pipes: usize,
    start: Option<&[f64]>,
) -> Result<(SolveReport, Vec<f64>), UcError> {
    let f = &milp.formulation;
    let opts = MilpOptions {
        with_duals: false,
        ..*opts
    };
    let rep = match start {
        Some(x0) => ctx.solve_milp_from(&f.model, &opts, x0)?,
        None => ctx.solve_milp(&f.model, &opts)?,
    };
    match rep.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible | SolveStatus::Unbounded => return Err(UcError::Infeasible),
        SolveStatus::Limit => {
            let incumbent = rep
                .has_primal()
                .then(|| Box::new(milp.compact.plan_of_z(&f.values(&f.z, &rep.primal), pipes)));
            return Err(UcError::Limit {
                incumbent,
                gap: rep.gap,
            });
        }
    }
    let fixed = f.model.with_integers_fixed(&rep.primal);
    let lp = ctx.solve_lp(&fixed)?;
    if !lp.is_optimal() {
        let mut point = rep.primal.clone();
        for &z in &f.z {
            point[z.0] = point[z.0].round();
        }
        return Ok((rep, point));
    }
    let point = least_dual(ctx, f, &fixed, &lp).unwrap_or(lp.primal);
    Ok((rep, point))
}

/// Rounds of the repair heuristic before falling back to switching coupled
/// units off.
const REPAIR_ROUNDS: usize = 30;

/// A plan whose sequential clearing keeps every selected block valid: the
/// decoupled problem is re-solved with each block found invalid forbidden in
/// its period. `None` if no such plan turns up.
pub(crate) fn repaired_plan(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    cm: &CompactModel,
) -> Result<Option<CommitmentPlan>, UcError> {
    let mut f = cm.decoupled_milp();
    let units = case.heat_units();
    let curves: Vec<_> = units
        .iter()
        .map(|u| MarginalHeatCostCurve::for_unit(*u))
        .collect();
    let opts = MilpOptions::default();
    for round in 0..=REPAIR_ROUNDS {
        if round == REPAIR_ROUNDS {
            for (j, _) in units.iter().enumerate().filter(|(_, u)| u.is_coupled()) {
                for k in cm.select[j].iter().flatten() {
                    f.model.set_bounds(f.z[*k], 0.0, 0.0);
                }
            }
        }
        let rep = ctx.solve_milp(&f.model, &opts)?;
        if !rep.has_primal() {
            return Ok(None);
        }
        let plan = cm.plan_of_z(&f.values(&f.z, &rep.primal), case.heat.pipes.len());
        let seq = match run_sequential(ctx, case, bids, &plan) {
            Ok(s) => s,
            Err(crate::market::MarketError::Infeasible { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut clean = true;
        for (j, u) in units.iter().enumerate() {
            let Some(bus) = u.node_power() else { continue };
            for t in 0..cm.periods {
                let floor = curves[j].eval(seq.lmp_at(&bus.0, t)) - ctx.tol.validity;
                for (b, blk) in bids[j]
                    .blocks(t)
                    .iter()
                    .enumerate()
                    .take(plan.units[j].blocks[t])
                {
                    if blk.price < floor {
                        clean = false;
                        f.model.set_bounds(f.z[cm.select[j][t][b]], 0.0, 0.0);
                    }
                }
            }
        }
        if clean {
            return Ok(Some(plan));
        }
    }
    Ok(None)
}

/// Full starting point for the single-level problem at `plan`, if the
/// problem is feasible there.
fn seed(
    ctx: &SolverContext,
    case: &Case,
    milp: &AwareMilp,
    plan: &CommitmentPlan,
) -> Option<Vec<f64>> {
    let f = &milp.formulation;
    let z = milp.compact.z_of_plan(plan, case);
    let mut x = vec![0.0; f.model.num_vars()];
    for (k, v) in f.z.iter().enumerate() {
        x[v.0] = z[k];
    }
    let rep = ctx.solve_lp(&f.model.with_integers_fixed(&x)).ok()?;
    if !rep.is_optimal() {
        log::debug!("repaired plan is not feasible for the single-level problem");
        return None;
    }
    Some(rep.primal)
}

/// Among optimal points at fixed commitment, the one with the smallest dual
/// magnitudes. Returns `None` when that second solve fails.
fn least_dual(
    ctx: &SolverContext,
    f: &Formulation,
    fixed: &Model,
    first: &SolveReport,
) -> Option<Vec<f64>> {
    let mut m = fixed.clone();
    let value = fixed.objective(&first.primal);
    let terms: Vec<_> = fixed
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.cost != 0.0)
        .map(|(k, v)| (crate::solver::VarId(k), v.cost))
        .collect();
    let rhs = value - fixed.objective_offset() + 1e-9 * value.abs().max(1.0);
    m.add_row("optimal_value", terms, Sense::Le, rhs);
    for k in 0..m.num_vars() {
        m.set_cost(crate::solver::VarId(k), 0.0);
    }
    for (&y, &(lo, hi)) in f.y.iter().zip(&f.y_bounds) {
        if lo >= 0.0 {
            m.set_cost(y, 1.0);
        } else if hi <= 0.0 {
            m.set_cost(y, -1.0);
        } else {
            let a = m.add_var(format!("abs_{}", m.var(y).name), 0.0, f64::INFINITY, 1.0);
            m.add_row(
                format!("abs+_{}", m.var(y).name),
                vec![(a, 1.0), (y, -1.0)],
                Sense::Ge,
                0.0,
            );
            m.add_row(
                format!("abs-_{}", m.var(y).name),
                vec![(a, 1.0), (y, 1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    let rep = ctx.solve_lp(&m).ok()?;
    rep.is_optimal()
        .then(|| rep.primal[..fixed.num_vars()].to_vec())
}

/// Name and bound of the first dual variable within 0.1% of its artificial
/// bound.
fn dual_at_bound(f: &Formulation, point: &[f64]) -> Option<(String, f64)> {
    f.y.iter().zip(&f.y_bounds).find_map(|(&y, &(lo, hi))| {
        let v = point[y.0];
        let hit = (lo < 0.0 && v <= 0.999 * lo) || (hi > 0.0 && v >= 0.999 * hi);
        hit.then(|| (f.model.var(y).name.clone(), lo.abs().max(hi)))
    })
}

fn finish(
    ctx: &SolverContext,
    case: &Case,
    bids: &[BidLadder],
    milp: &AwareMilp,
    rep: &SolveReport,
    point: &[f64],
    escalations: usize,
) -> Result<AwareSolution, UcError> {
    let (f, cm, gamma) = (&milp.formulation, &milp.compact, milp.gamma);
    let max_envelope_error = f.max_envelope_error(point);
    if max_envelope_error > ctx.tol.mccormick {
        return Err(UcError::McCormick(max_envelope_error));
    }
    let z = f.values(&f.z, point);
    let x = f.values(&f.x, point);
    let y = f.values(&f.y, point);

    let weight = |p: Part| if p == Part::Heat { gamma } else { 1.0 - gamma };
    let primal: f64 =
        cm.x.iter()
            .zip(&x)
            .map(|(v, xi)| weight(v.part) * v.cost * xi)
            .sum();
    let dual: f64 = cm
        .rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| yi * (r.rhs + r.z_rhs.iter().map(|&(k, g)| g * z[k]).sum::<f64>()))
        .sum();
    let strong_duality_gap = (primal - dual).abs() / primal.abs().max(dual.abs()).max(1.0);
    if strong_duality_gap > ctx.tol.duality {
        return Err(UcError::StrongDuality(strong_duality_gap));
    }

    let plan = cm.plan_of_z(&z, case.heat.pipes.len());
    let heat_dispatch = cm.heat_dispatch(&x);
    let mut lmps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((bus, t), &r) in &cm.elec_balance {
        let v = lmps
            .entry(bus.0.clone())
            .or_insert_with(|| vec![0.0; cm.periods]);
        v[*t] = crate::market::clean(y[r] / (1.0 - gamma));
    }
    let weighted_heat_cost = gamma * (cm.commitment_cost(&z) + cm.market_cost(&x, Part::Heat));
    let weighted_electricity_cost = (1.0 - gamma) * cm.market_cost(&x, Part::Electricity);
    let split = |part: Part, v: &[f64], parts: &mut dyn Iterator<Item = Part>| -> Vec<f64> {
        v.iter()
            .zip(parts)
            .filter(|(_, p)| *p == part)
            .map(|(a, _)| *a)
            .collect()
    };
    let heat_primal = split(Part::Heat, &x, &mut cm.x.iter().map(|v| v.part));
    let electricity_primal = split(Part::Electricity, &x, &mut cm.x.iter().map(|v| v.part));
    let heat_duals = split(Part::Heat, &y, &mut cm.rows.iter().map(|r| r.part));
    let electricity_duals = split(Part::Electricity, &y, &mut cm.rows.iter().map(|r| r.part));

    let sequential = run_sequential(ctx, case, bids, &plan)?;
    let heat_diff = heat_dispatch
        .iter()
        .flat_map(|(u, q)| {
            let s = &sequential.heat.dispatch[u];
            q.iter().zip(s).map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let lmp_diff = lmps
        .iter()
        .flat_map(|(bus, v)| {
            v.iter()
                .enumerate()
                .map(|(t, l)| (l - sequential.lmp_at(bus, t)).abs())
        })
        .fold(0.0, f64::max);
    let multiplicity = heat_diff > ctx.tol.consistency || lmp_diff > ctx.tol.consistency;
    if multiplicity {
        log::warn!("single-level and sequential results differ (heat {heat_diff:.3e}, price {lmp_diff:.3e})");
    }

    Ok(AwareSolution {
        gamma,
        plan,
        heat_dispatch,
        heat_primal,
        electricity_primal,
        heat_duals,
        electricity_duals,
        lmps,
        objective: weighted_heat_cost + weighted_electricity_cost,
        weighted_heat_cost,
        weighted_electricity_cost,
        gap: rep.gap,
        diagnostics: AwareDiagnostics {
            max_envelope_error,
            strong_duality_gap,
            max_violation: f.model.max_violation(point),
            lmp_bound: milp.bounds.lmp,
            escalations,
        },
        consistency: Consistency {
            heat_dispatch: heat_diff,
            lmp: lmp_diff,
            multiplicity,
        },
        sequential,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidding::build_case_heat_bids;
    use crate::market::testcase::small_case;

    #[test]
    fn gamma_outside_unit_interval() {
        let c = small_case();
        let bids = build_case_heat_bids(&c).unwrap();
        for g in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                build_aware_milp(&c, &bids, g, &Tolerances::default()),
                Err(UcError::Gamma(_))
            ));
        }
    }

    #[test]
    fn zero_heat_load_commits_nothing() {
        let mut c = small_case();
        for v in c.heat.load.values_mut() {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        for u in &mut c.chps {
            u.uc.initial_on = false;
        }
        let bids = build_case_heat_bids(&c).unwrap();
        let sol = solve_aware(
            &SolverContext::default(),
            &c,
            &bids,
            &AwareOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.plan, CommitmentPlan::all_off(&c));
        assert_eq!(sol.weighted_heat_cost, 0.0);
        assert!(!sol.consistency.multiplicity);
    }

    #[test]
    fn lp_export_names_the_duality_row() {
        let c = small_case().window(0..1);
        let bids = build_case_heat_bids(&c).unwrap();
        let m = build_aware_milp(&c, &bids, 0.99, &Tolerances::default()).unwrap();
        let text = m.to_lp();
        assert!(text.contains("strong_duality"));
        let back = lp_format::read_lp(&text).unwrap();
        assert_eq!(back.num_vars(), m.formulation.model.num_vars());
        assert_eq!(back.num_rows(), m.formulation.model.num_rows());
    }
}
