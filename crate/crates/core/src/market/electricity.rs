use std::collections::BTreeMap;

use crate::bidding::{AdjustedElectricityPosition, Market};
use crate::solver::{check_lp_optimality, Model, RowId, Sense, SolveStatus, SolverContext, VarId};
use crate::system::{Block, BusId, Case, UnitId};

use super::{clean, BlockAcceptance, MarketError, MarketOutcome};

/// Electricity offers of one participant in one period.
pub(crate) struct Offer<'a> {
    pub unit: &'a UnitId,
    pub bus: &'a BusId,
    pub blocks: Vec<Block>,
}

/// Tie-break rank of each electricity participant: lexicographic unit id.
pub(crate) fn electricity_ranks(case: &Case) -> BTreeMap<UnitId, usize> {
    let mut ids: Vec<&UnitId> = case
        .thermal
        .iter()
        .map(|g| &g.id)
        .chain(case.wind.iter().map(|w| &w.id))
        .chain(case.chps.iter().map(|c| &c.id))
        .collect();
    ids.sort();
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect()
}

pub(crate) fn max_electricity_blocks(case: &Case) -> usize {
    case.thermal
        .iter()
        .map(|g| g.blocks.len())
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Offers of period `t`: thermal ladders, wind at zero price and CHP blocks
/// from the positions, ordered by unit id.
fn offers<'a>(
    case: &'a Case,
    positions: &'a [AdjustedElectricityPosition],
    t: usize,
) -> Vec<Offer<'a>> {
    let mut out: Vec<Offer<'a>> = case
        .thermal
        .iter()
        .map(|g| Offer {
            unit: &g.id,
            bus: &g.bus,
            blocks: g.blocks.clone(),
        })
        .chain(case.wind.iter().map(|w| Offer {
            unit: &w.id,
            bus: &w.bus,
            blocks: vec![Block {
                price: 0.0,
                quantity: w.available[t],
            }],
        }))
        .chain(
            positions
                .iter()
                .filter(|p| case.chps.iter().any(|c| c.id == p.unit))
                .map(|p| Offer {
                    unit: &p.unit,
                    bus: &p.bus,
                    blocks: p.periods[t].flexible.clone(),
                }),
        )
        .collect();
    out.sort_by(|a, b| a.unit.cmp(b.unit));
    out
}

struct ElecLp {
    model: Model,
    /// (unit, bus, block, period, price, quantity, var)
    blocks: Vec<(UnitId, usize, usize, f64, f64, VarId)>,
    balance: BTreeMap<(BusId, usize), RowId>,
    /// Per line and period: flow expressed on angle variables.
    flows: Vec<Vec<Vec<(VarId, f64)>>>,
}

fn build(
    case: &Case,
    positions: &[AdjustedElectricityPosition],
    periods: &[usize],
    tie: f64,
) -> ElecLp {
    let mut m = Model::new();
    let ranks = electricity_ranks(case);
    let width = max_electricity_blocks(case);
    let reference = &case.power.buses[0];
    let mut blocks = Vec::new();
    let mut balance = BTreeMap::new();
    let mut flows = vec![Vec::new(); case.power.lines.len()];
    for &t in periods {
        let mut inj: BTreeMap<&BusId, Vec<(VarId, f64)>> = BTreeMap::new();
        for offer in offers(case, positions, t) {
            for (b, blk) in offer.blocks.iter().enumerate() {
                let cost = blk.price + tie * (ranks[offer.unit] * width + b) as f64;
                let v = m.add_var(format!("e_{}_{b}_{t}", offer.unit), 0.0, blk.quantity, cost);
                blocks.push((offer.unit.clone(), b, t, blk.price, blk.quantity, v));
                inj.entry(offer.bus).or_default().push((v, 1.0));
            }
        }
        let theta: BTreeMap<&BusId, VarId> = case
            .power
            .buses
            .iter()
            .filter(|b| *b != reference)
            .map(|b| {
                (
                    b,
                    m.add_var(
                        format!("theta_{b}_{t}"),
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        0.0,
                    ),
                )
            })
            .collect();
        for (k, line) in case.power.lines.iter().enumerate() {
            let bl = case.power.susceptance(line);
            let mut expr = Vec::new();
            if let Some(&v) = theta.get(&line.from) {
                expr.push((v, bl));
            }
            if let Some(&v) = theta.get(&line.to) {
                expr.push((v, -bl));
            }
            m.add_row(
                format!("cap+_{}_{t}", line.id),
                expr.clone(),
                Sense::Le,
                line.capacity,
            );
            m.add_row(
                format!("cap-_{}_{t}", line.id),
                expr.clone(),
                Sense::Ge,
                -line.capacity,
            );
            for &(v, a) in &expr {
                inj.entry(&line.from).or_default().push((v, -a));
                inj.entry(&line.to).or_default().push((v, a));
            }
            flows[k].push(expr);
        }
        let mut fixed: BTreeMap<&BusId, f64> = BTreeMap::new();
        for p in positions {
            *fixed.entry(&p.bus).or_default() += p.periods[t].self_commit;
        }
        for bus in &case.power.buses {
            let rhs = case.power.load_at(bus, t) - fixed.get(bus).copied().unwrap_or(0.0);
            let row = m.add_row(
                format!("bal_{bus}_{t}"),
                merge(inj.remove(bus).unwrap_or_default()),
                Sense::Eq,
                rhs,
            );
            balance.insert((bus.clone(), t), row);
        }
    }
    ElecLp {
        model: m,
        blocks,
        balance,
        flows,
    }
}

fn merge(mut terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => out.push((v, a)),
        }
    }
    out
}

/// DC optimal power flow over thermal, wind and CHP offers with the heat
/// units' self-commitments as fixed injections.
pub fn clear_electricity(
    ctx: &SolverContext,
    case: &Case,
    positions: &[AdjustedElectricityPosition],
) -> Result<MarketOutcome, MarketError> {
    let n = case.horizon.len;
    let all: Vec<usize> = case.horizon.periods().collect();
    let lp = build(case, positions, &all, ctx.tol.tie_break);
    let rep = ctx.solve_lp(&lp.model)?;
    match rep.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            for &t in &all {
                let single = build(case, positions, &[t], ctx.tol.tie_break);
                if ctx.solve_lp(&single.model)?.status == SolveStatus::Infeasible {
                    return Err(MarketError::Infeasible {
                        market: Market::Electricity,
                        period: t,
                        location: None,
                    });
                }
            }
            return Err(MarketError::Infeasible {
                market: Market::Electricity,
                period: 0,
                location: None,
            });
        }
        SolveStatus::Unbounded => return Err(MarketError::Unbounded(Market::Electricity)),
        SolveStatus::Limit => return Err(MarketError::Limit(Market::Electricity)),
    }
    let optimality = check_lp_optimality(&lp.model, &rep).expect("LP duals");

    let mut dispatch: BTreeMap<UnitId, Vec<f64>> = BTreeMap::new();
    for id in electricity_ranks(case).keys() {
        dispatch.insert(id.clone(), vec![0.0; n]);
    }
    let mut consumption = BTreeMap::new();
    for p in positions {
        let sc: Vec<f64> = p.periods.iter().map(|x| x.self_commit).collect();
        if case.chps.iter().any(|c| c.id == p.unit) {
            dispatch.insert(p.unit.clone(), sc);
        } else {
            consumption.insert(p.unit.clone(), sc.iter().map(|x| clean(-x)).collect());
        }
    }
    let mut blocks = Vec::with_capacity(lp.blocks.len());
    let mut objective = 0.0;
    for (unit, b, t, price, quantity, v) in lp.blocks {
        let a = clean(rep.value(v));
        objective += price * a;
        dispatch.get_mut(&unit).expect("known unit")[t] += a;
        blocks.push(BlockAcceptance {
            unit,
            block: b,
            period: t,
            price,
            quantity,
            accepted: a,
        });
    }
    let flows = case
        .power
        .lines
        .iter()
        .zip(&lp.flows)
        .map(|(line, per_t)| {
            let f = per_t
                .iter()
                .map(|expr| clean(expr.iter().map(|&(v, a)| a * rep.value(v)).sum()))
                .collect();
            (line.id.clone(), f)
        })
        .collect();
    let mut prices: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((bus, t), row) in &lp.balance {
        prices.entry(bus.0.clone()).or_insert_with(|| vec![0.0; n])[*t] =
            clean(rep.dual(*row).expect("LP duals"));
    }
    Ok(MarketOutcome {
        market: Market::Electricity,
        blocks,
        dispatch,
        consumption,
        prices,
        flows,
        losses: vec![0.0; n],
        objective,
        optimality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bidding::PositionPeriod;
    use crate::system::{
        HeatNetwork, Horizon, Line, PowerNetwork, Settings, ThermalPlant, WindFarm,
    };

    fn grid(lines: Vec<Line>, load: Vec<(&str, f64)>) -> Case {
        let mut buses: Vec<BusId> = vec!["b1".into()];
        for l in &lines {
            for b in [&l.from, &l.to] {
                if !buses.contains(b) {
                    buses.push(b.clone());
                }
            }
        }
        Case {
            name: "grid".into(),
            horizon: Horizon {
                first_hour: 0,
                len: 1,
            },
            settings: Settings::default(),
            power: PowerNetwork {
                buses,
                lines,
                load: load.into_iter().map(|(b, v)| (b.into(), vec![v])).collect(),
                base_mva: 100.0,
            },
            heat: HeatNetwork {
                nodes: vec![],
                pipes: vec![],
                load: BTreeMap::new(),
            },
            chps: vec![],
            heat_pumps: vec![],
            heat_only: vec![],
            thermal: vec![],
            wind: vec![],
            foreseen_lmps: BTreeMap::new(),
        }
    }

    fn line(from: &str, to: &str, cap: f64) -> Line {
        Line {
            id: format!("{from}{to}"),
            from: from.into(),
            to: to.into(),
            reactance: 0.1,
            capacity: cap,
        }
    }

    fn thermal(id: &str, bus: &str, price: f64, q: f64) -> ThermalPlant {
        ThermalPlant {
            id: id.into(),
            bus: bus.into(),
            blocks: vec![Block { price, quantity: q }],
        }
    }

    #[test]
    fn wind_on_single_bus() {
        let mut c = grid(vec![], vec![("b1", 100.0)]);
        c.wind.push(WindFarm {
            id: "W".into(),
            bus: "b1".into(),
            available: vec![120.0],
        });
        let out = clear_electricity(&SolverContext::default(), &c, &[]).unwrap();
        assert!((out.dispatch[&"W".into()][0] - 100.0).abs() < 1e-9);
        assert!(out.price("b1", 0).abs() < 1e-6);
    }

    #[test]
    fn uncongested_equal_prices() {
        let mut c = grid(vec![line("b1", "b2", 500.0)], vec![("b2", 100.0)]);
        c.thermal = vec![
            thermal("A", "b1", 10.0, 80.0),
            thermal("B", "b2", 30.0, 80.0),
        ];
        let out = clear_electricity(&SolverContext::default(), &c, &[]).unwrap();
        assert!((out.price("b1", 0) - out.price("b2", 0)).abs() < 1e-6);
        assert!((out.price("b1", 0) - 30.0).abs() < 1e-6);
    }

    #[test]
    fn congested_two_bus() {
        let mut c = grid(vec![line("b1", "b2", 50.0)], vec![("b2", 80.0)]);
        c.thermal = vec![
            thermal("A", "b1", 10.0, 100.0),
            thermal("B", "b2", 30.0, 100.0),
        ];
        let out = clear_electricity(&SolverContext::default(), &c, &[]).unwrap();
        assert!((out.price("b1", 0) - 10.0).abs() < 1e-6);
        assert!((out.price("b2", 0) - 30.0).abs() < 1e-6);
        assert!((out.flows["b1b2"][0] - 50.0).abs() < 1e-7);
        assert!((out.objective - 1400.0).abs() < 1e-7);
    }

    #[test]
    fn self_commit_beyond_export_is_infeasible() {
        let mut c = grid(vec![line("b1", "b2", 10.0)], vec![("b2", 5.0)]);
        c.thermal = vec![thermal("A", "b2", 10.0, 100.0)];
        let pos = AdjustedElectricityPosition {
            unit: "C".into(),
            bus: "b1".into(),
            periods: vec![PositionPeriod {
                self_commit: 30.0,
                flexible: vec![],
            }],
        };
        let err = clear_electricity(&SolverContext::default(), &c, &[pos]).unwrap_err();
        assert!(matches!(
            err,
            MarketError::Infeasible {
                market: Market::Electricity,
                period: 0,
                ..
            }
        ));
    }

    #[test]
    fn heat_pump_consumption_is_load() {
        let mut c = grid(vec![], vec![("b1", 10.0)]);
        c.thermal = vec![thermal("A", "b1", 10.0, 100.0)];
        let pos = AdjustedElectricityPosition {
            unit: "HP".into(),
            bus: "b1".into(),
            periods: vec![PositionPeriod {
                self_commit: -5.0,
                flexible: vec![],
            }],
        };
        let out = clear_electricity(&SolverContext::default(), &c, &[pos]).unwrap();
        assert!((out.dispatch[&"A".into()][0] - 15.0).abs() < 1e-9);
        assert_eq!(out.consumption[&"HP".into()], vec![5.0]);
    }
}
