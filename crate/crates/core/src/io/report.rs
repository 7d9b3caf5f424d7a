//! Cost accounting and CSV tables for finished runs.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::market::{check_cost_recovery, RecoveryReport, SequentialResult};
use crate::system::{Case, UnitId};

use super::ScenarioError;

/// Costs of one period. Heat pump heat is not charged to the heat system:
/// its electricity is already paid for on the electricity side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodCosts {
    pub period: usize,
    pub hour: usize,
    pub commitment: f64,
    /// Commitment plus accepted heat bids of CHPs and heat-only units.
    pub heat: f64,
    /// Accepted electricity bids plus CHP self-commitment at marginal power cost.
    pub electricity: f64,
    pub overall: f64,
    pub wind_available: f64,
    pub wind_curtailed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub periods: Vec<PeriodCosts>,
    pub heat: f64,
    pub electricity: f64,
    pub overall: f64,
    pub curtailment_percent: f64,
}

pub fn cost_breakdown(case: &Case, seq: &SequentialResult) -> CostBreakdown {
    let periods: Vec<PeriodCosts> = case
        .horizon
        .periods()
        .map(|t| {
            let commitment = seq.plan.period_commitment_cost(case, t);
            let heat_bids: f64 = seq
                .heat
                .blocks
                .iter()
                .filter(|b| b.period == t && !case.heat_pumps.iter().any(|h| h.id == b.unit))
                .map(|b| b.price * b.accepted)
                .sum();
            let self_commit: f64 = case
                .chps
                .iter()
                .filter_map(|c| {
                    let pos = seq.positions.iter().find(|p| p.unit == c.id)?;
                    Some(c.marginal_power_cost() * pos.periods[t].self_commit)
                })
                .sum();
            let heat = commitment + heat_bids;
            let electricity = seq.electricity.period_objective(t) + self_commit;
            PeriodCosts {
                period: t,
                hour: case.horizon.hour(t),
                commitment,
                heat,
                electricity,
                overall: heat + electricity,
                wind_available: seq.curtailment.period_available(t),
                wind_curtailed: seq.curtailment.period_curtailed(t),
            }
        })
        .collect();
    let heat = periods.iter().map(|p| p.heat).sum();
    let electricity = periods.iter().map(|p| p.electricity).sum();
    CostBreakdown {
        heat,
        electricity,
        overall: periods.iter().map(|p| p.overall).sum(),
        curtailment_percent: seq.curtailment.percent(),
        periods,
    }
}

/// A cleared commitment plan with everything the tables need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRun {
    pub model: String,
    pub case_name: String,
    pub seq: SequentialResult,
    pub recovery: RecoveryReport,
    pub costs: CostBreakdown,
    /// Objective reported by the commitment model, if any.
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

impl ModelRun {
    pub fn new(case: &Case, model: &str, seq: SequentialResult, validity_tol: f64) -> Self {
        Self {
            model: model.to_string(),
            case_name: case.name.clone(),
            recovery: check_cost_recovery(case, &seq, validity_tol),
            costs: cost_breakdown(case, &seq),
            seq,
            objective: None,
            gap: None,
        }
    }
}

/// Totals of one model, costs in 10^3 $.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemCosts {
    pub overall: f64,
    pub heat: f64,
    pub electricity: f64,
    /// Curtailed wind as a percentage of available wind.
    pub curtailment_percent: f64,
}

impl SystemCosts {
    fn of(run: &ModelRun) -> Self {
        Self {
            overall: run.costs.overall / 1e3,
            heat: run.costs.heat / 1e3,
            electricity: run.costs.electricity / 1e3,
            curtailment_percent: run.costs.curtailment_percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitLoss {
    pub unit: UnitId,
    pub decoupled: f64,
    pub aware: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchDelta {
    pub market: &'static str,
    pub unit: UnitId,
    pub period: usize,
    pub decoupled: f64,
    pub aware: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub case_name: String,
    pub decoupled: SystemCosts,
    pub aware: SystemCosts,
    /// Cost-recovery loss per coupled unit over the horizon.
    pub recovery: Vec<UnitLoss>,
    pub dispatch: Vec<DispatchDelta>,
}

impl ComparisonReport {
    /// Aware minus decoupled.
    pub fn deltas(&self) -> SystemCosts {
        SystemCosts {
            overall: self.aware.overall - self.decoupled.overall,
            heat: self.aware.heat - self.decoupled.heat,
            electricity: self.aware.electricity - self.decoupled.electricity,
            curtailment_percent: self.aware.curtailment_percent
                - self.decoupled.curtailment_percent,
        }
    }
}

fn shape(run: &ModelRun) -> (usize, Vec<&UnitId>, Vec<&UnitId>) {
    (
        run.seq.heat.periods(),
        run.seq.plan.units.iter().map(|u| &u.unit).collect(),
        run.seq.curtailment.available.keys().collect(),
    )
}

/// Side-by-side report of two runs on the same case.
pub fn emit_comparison(
    decoupled: &ModelRun,
    aware: &ModelRun,
) -> Result<ComparisonReport, ScenarioError> {
    if decoupled.case_name != aware.case_name || shape(decoupled) != shape(aware) {
        return Err(ScenarioError::Mismatch(format!(
            "runs `{}` and `{}` were made on different cases",
            decoupled.case_name, aware.case_name
        )));
    }
    let losses = |r: &ModelRun| r.recovery.unit_losses();
    let recovery = losses(decoupled)
        .into_iter()
        .zip(losses(aware))
        .map(|((unit, d), (_, a))| UnitLoss {
            unit,
            decoupled: d,
            aware: a,
        })
        .collect();
    let mut dispatch = Vec::new();
    for (market, d, a) in [
        ("heat", &decoupled.seq.heat, &aware.seq.heat),
        (
            "electricity",
            &decoupled.seq.electricity,
            &aware.seq.electricity,
        ),
    ] {
        for (unit, dq) in &d.dispatch {
            let Some(aq) = a.dispatch.get(unit) else {
                continue;
            };
            for (t, (&x, &y)) in dq.iter().zip(aq).enumerate() {
                dispatch.push(DispatchDelta {
                    market,
                    unit: unit.clone(),
                    period: t,
                    decoupled: x,
                    aware: y,
                    delta: y - x,
                });
            }
        }
    }
    Ok(ComparisonReport {
        case_name: decoupled.case_name.clone(),
        decoupled: SystemCosts::of(decoupled),
        aware: SystemCosts::of(aware),
        recovery,
        dispatch,
    })
}

/// Negative zero and sub-1e-12 noise print as 0.
fn num(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

fn write_csv<R: Serialize>(
    dir: &Path,
    name: &str,
    rows: impl IntoIterator<Item = R>,
) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|source| ScenarioError::Io {
        path: path.clone(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)
            .map_err(|e| ScenarioError::Output(format!("{}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|source| ScenarioError::Io { path, source })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    model: &'a str,
    period: String,
    hour: String,
    commitment_cost: f64,
    heat_cost: f64,
    electricity_cost: f64,
    overall_cost: f64,
    wind_available: f64,
    wind_curtailed: f64,
}

#[derive(Serialize)]
struct PlanRow<'a> {
    model: &'a str,
    unit: &'a str,
    period: usize,
    on: u8,
    blocks: usize,
}

#[derive(Serialize)]
struct DispatchRow<'a> {
    model: &'a str,
    market: &'a str,
    unit: &'a str,
    period: usize,
    quantity: f64,
}

#[derive(Serialize)]
struct PriceRow<'a> {
    model: &'a str,
    node: &'a str,
    period: usize,
    price: f64,
}

#[derive(Serialize)]
struct CurtailmentRow<'a> {
    model: &'a str,
    wind: &'a str,
    period: usize,
    available: f64,
    dispatched: f64,
    curtailed: f64,
}

#[derive(Serialize)]
struct ValidityRow<'a> {
    model: &'a str,
    unit: &'a str,
    period: usize,
    lmp: f64,
    marginal_cost: f64,
    bid_price: Option<f64>,
    accepted: f64,
    invalid_blocks: usize,
    loss: f64,
}

#[derive(Serialize)]
struct StackRow<'a> {
    model: &'a str,
    network: String,
    unit: &'a str,
    period: usize,
    heat: f64,
}

#[derive(Serialize)]
struct WindRow<'a> {
    model: &'a str,
    period: usize,
    available: f64,
    dispatched: f64,
    curtailed: f64,
}

/// Write the per-run tables, one row block per run.
pub fn write_tables(dir: &Path, case: &Case, runs: &[ModelRun]) -> Result<(), ScenarioError> {
    let mut rows = Vec::new();
    for r in runs {
        for p in &r.costs.periods {
            rows.push(SummaryRow {
                model: &r.model,
                period: p.period.to_string(),
                hour: p.hour.to_string(),
                commitment_cost: num(p.commitment),
                heat_cost: num(p.heat),
                electricity_cost: num(p.electricity),
                overall_cost: num(p.overall),
                wind_available: num(p.wind_available),
                wind_curtailed: num(p.wind_curtailed),
            });
        }
        let c = &r.costs;
        rows.push(SummaryRow {
            model: &r.model,
            period: "total".into(),
            hour: String::new(),
            commitment_cost: num(c.periods.iter().map(|p| p.commitment).sum()),
            heat_cost: num(c.heat),
            electricity_cost: num(c.electricity),
            overall_cost: num(c.overall),
            wind_available: num(r.seq.curtailment.total_available()),
            wind_curtailed: num(r.seq.curtailment.total_curtailed()),
        });
    }
    write_csv(dir, "summary.csv", rows)?;

    write_csv(
        dir,
        "plan.csv",
        runs.iter().flat_map(|r| {
            r.seq.plan.units.iter().flat_map(move |u| {
                (0..u.on.len()).map(move |t| PlanRow {
                    model: &r.model,
                    unit: &u.unit.0,
                    period: t,
                    on: u8::from(u.on[t]),
                    blocks: u.blocks[t],
                })
            })
        }),
    )?;

    let mut rows = Vec::new();
    for r in runs {
        for (market, series) in [
            ("heat", &r.seq.heat.dispatch),
            ("electricity", &r.seq.electricity.dispatch),
            ("consumption", &r.seq.electricity.consumption),
        ] {
            for (unit, q) in series {
                for (t, &v) in q.iter().enumerate() {
                    rows.push(DispatchRow {
                        model: &r.model,
                        market,
                        unit: &unit.0,
                        period: t,
                        quantity: num(v),
                    });
                }
            }
        }
    }
    write_csv(dir, "dispatch.csv", rows)?;

    fn prices(r: &ModelRun, heat: bool) -> Vec<PriceRow<'_>> {
        let m = if heat {
            &r.seq.heat
        } else {
            &r.seq.electricity
        };
        m.prices
            .iter()
            .flat_map(move |(node, p)| {
                p.iter().enumerate().map(move |(t, &v)| PriceRow {
                    model: &r.model,
                    node,
                    period: t,
                    price: num(v),
                })
            })
            .collect()
    }
    write_csv(dir, "lmps.csv", runs.iter().flat_map(|r| prices(r, false)))?;
    write_csv(
        dir,
        "heat_prices.csv",
        runs.iter().flat_map(|r| prices(r, true)),
    )?;

    let mut rows = Vec::new();
    for r in runs {
        let c = &r.seq.curtailment;
        for (w, avail) in &c.available {
            for (t, &a) in avail.iter().enumerate() {
                let cut = c.curtailed[w][t];
                rows.push(CurtailmentRow {
                    model: &r.model,
                    wind: &w.0,
                    period: t,
                    available: num(a),
                    dispatched: num(a - cut),
                    curtailed: num(cut),
                });
            }
        }
    }
    write_csv(dir, "curtailment.csv", rows)?;

    write_csv(
        dir,
        "validity.csv",
        runs.iter().flat_map(|r| {
            r.recovery.entries.iter().map(move |e| ValidityRow {
                model: &r.model,
                unit: &e.unit.0,
                period: e.period,
                lmp: num(e.lmp),
                marginal_cost: num(e.marginal_cost),
                bid_price: e.bid_price.map(num),
                accepted: num(e.accepted),
                invalid_blocks: e.invalid_blocks,
                loss: num(e.loss),
            })
        }),
    )?;

    let networks = case.heat_networks();
    let mut rows = Vec::new();
    for r in runs {
        for (k, nodes) in networks.iter().enumerate() {
            for u in case
                .heat_units()
                .iter()
                .filter(|u| nodes.contains(u.node_heat()))
            {
                let Some(q) = r.seq.heat.dispatch_of(u.id()) else {
                    continue;
                };
                for (t, &v) in q.iter().enumerate() {
                    rows.push(StackRow {
                        model: &r.model,
                        network: format!("net{}", k + 1),
                        unit: &u.id().0,
                        period: t,
                        heat: num(v),
                    });
                }
            }
        }
    }
    write_csv(dir, "heat_stack.csv", rows)?;

    write_csv(
        dir,
        "wind.csv",
        runs.iter().flat_map(|r| {
            let c = &r.seq.curtailment;
            (0..r.seq.heat.periods()).map(move |t| WindRow {
                model: &r.model,
                period: t,
                available: num(c.period_available(t)),
                dispatched: num(c.period_available(t) - c.period_curtailed(t)),
                curtailed: num(c.period_curtailed(t)),
            })
        }),
    )
}

#[derive(Serialize)]
struct ComparisonRow {
    metric: &'static str,
    unit: &'static str,
    decoupled: f64,
    aware: f64,
    delta: f64,
}

#[derive(Serialize)]
struct LossRow<'a> {
    unit: &'a str,
    decoupled_loss: f64,
    aware_loss: f64,
}

pub fn write_comparison(dir: &Path, rep: &ComparisonReport) -> Result<(), ScenarioError> {
    let (d, a, x) = (&rep.decoupled, &rep.aware, rep.deltas());
    let row = |metric, unit, f: fn(&SystemCosts) -> f64| ComparisonRow {
        metric,
        unit,
        decoupled: num(f(d)),
        aware: num(f(a)),
        delta: num(f(&x)),
    };
    write_csv(
        dir,
        "comparison.csv",
        [
            row("overall_cost", "k$", |c| c.overall),
            row("heat_cost", "k$", |c| c.heat),
            row("electricity_cost", "k$", |c| c.electricity),
            row("wind_curtailment", "%", |c| c.curtailment_percent),
        ],
    )?;
    write_csv(
        dir,
        "recovery.csv",
        rep.recovery.iter().map(|l| LossRow {
            unit: &l.unit.0,
            decoupled_loss: num(l.decoupled),
            aware_loss: num(l.aware),
        }),
    )?;
    write_csv(
        dir,
        "dispatch_delta.csv",
        rep.dispatch.iter().map(|d| DispatchDelta {
            decoupled: num(d.decoupled),
            aware: num(d.aware),
            delta: num(d.delta),
            ..d.clone()
        }),
    )
}

/// Pretty JSON file.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| ScenarioError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| ScenarioError::Io { path, source })
}
