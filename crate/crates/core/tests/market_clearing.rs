mod common;

use std::fmt::Write;

use heatuc::bidding::build_case_heat_bids;
use heatuc::io::parse_case;
use heatuc::market::{check_cost_recovery, clear_heat, run_sequential, MarketError};
use heatuc::solver::MilpOptions;
use heatuc::uc::{solve_decoupled_uc, CommitmentPlan};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::{ctx, rel_err};

/// Least cost of serving `demand` from blocks sorted by price, or `None`
/// when the blocks fall short.
fn merit_cost(blocks: &[(f64, f64)], demand: f64) -> Option<f64> {
    if demand < -1e-9 {
        return None;
    }
    let mut left = demand.max(0.0);
    let mut cost = 0.0;
    for &(p, q) in blocks {
        let take = left.min(q);
        cost += p * take;
        left -= take;
    }
    (left <= 1e-9).then_some(cost)
}

/// Cumulative quantities where the marginal block of a node changes.
fn breakpoints(blocks: &[(f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for &(_, q) in blocks {
        acc += q;
        out.push(acc);
    }
    out
}

#[test]
fn small_case_heat_matches_vertex_enumeration() {
    let ctx = ctx();
    let case = common::small();
    let bids = build_case_heat_bids(&case).unwrap();
    let out = clear_heat(&ctx, &case, &bids, &CommitmentPlan::all_on(&case)).unwrap();
    let pipe = &case.heat.pipes[0];
    let (from, to) = (&pipe.from, &pipe.to);
    let kept = 1.0 - pipe.loss;
    for t in case.horizon.periods() {
        let at = |node: &heatuc::system::HeatNodeId| {
            let mut v: Vec<(f64, f64)> = case
                .heat_units()
                .iter()
                .zip(&bids)
                .filter(|(u, _)| u.node_heat() == node)
                .flat_map(|(_, l)| l.blocks(t).iter().map(|b| (b.price, b.quantity)))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        };
        let (a, b) = (at(from), at(to));
        let (la, lb) = (case.heat.load_at(from, t), case.heat.load_at(to, t));
        // signed flow x: positive from `from` to `to`
        let demand = |x: f64| {
            if x >= 0.0 {
                (la + x, lb - kept * x)
            } else {
                (la + kept * x, lb - x)
            }
        };
        let mut candidates = vec![-pipe.capacity, 0.0, pipe.capacity];
        for s in breakpoints(&a) {
            candidates.extend([s - la, (s - la) / kept]);
        }
        for s in breakpoints(&b) {
            candidates.extend([(lb - s) / kept, lb - s]);
        }
        let best = candidates
            .into_iter()
            .filter(|x| x.abs() <= pipe.capacity + 1e-9)
            .filter_map(|x| {
                let (da, db) = demand(x);
                Some(merit_cost(&a, da)? + merit_cost(&b, db)?)
            })
            .fold(f64::INFINITY, f64::min);
        let lp = out.period_objective(t);
        assert!(rel_err(lp, best) <= 1e-6, "period {t}: {lp} vs {best}");
    }
}

fn single_node_case(prices: &[f64], load: f64) -> String {
    let mut s = String::from(
        "schema_version = 1\nbuses = [\"b\"]\nheat_nodes = [\"h\"]\n[horizon]\nperiods = 1\n",
    );
    for (k, p) in prices.iter().enumerate() {
        write!(
            s,
            "[[units.heat_only]]\nid = \"U{k:02}\"\nnode_heat = \"h\"\nq_max = 10.0\nmarginal_cost = {p}\nblock_shares = [0.5, 0.5]\n"
        )
        .unwrap();
    }
    write!(s, "[[loads.heat]]\nnode = \"h\"\nprofile = [{load}]\n").unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_node_dispatch_follows_merit_order(
        prices in prop::collection::vec(0.0f64..100.0, 1..6),
        fill in 0.0f64..1.0,
    ) {
        let load = fill * 10.0 * prices.len() as f64;
        let case = parse_case(&single_node_case(&prices, load)).unwrap();
        let bids = build_case_heat_bids(&case).unwrap();
        let out = clear_heat(&ctx(), &case, &bids, &CommitmentPlan::all_on(&case)).unwrap();
        let mut blocks: Vec<(f64, f64)> = prices.iter().flat_map(|&p| [(p, 5.0), (p, 5.0)]).collect();
        blocks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expected = merit_cost(&blocks, load).unwrap();
        prop_assert!((out.objective - expected).abs() <= 1e-6 * expected.max(1.0));
        // every block cheaper than the dearest accepted one is full
        let marginal = out.blocks.iter().filter(|b| b.accepted > 1e-9).map(|b| b.price).fold(f64::NEG_INFINITY, f64::max);
        for b in &out.blocks {
            if b.price < marginal - 1e-9 {
                prop_assert!((b.accepted - b.quantity).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn energy_is_conserved(seed in any::<u64>()) {
        let ctx = ctx();
        let mut rng = StdRng::seed_from_u64(seed);
        let case = common::random_case(&mut rng, 3);
        let bids = build_case_heat_bids(&case).unwrap();
        let seq = match run_sequential(&ctx, &case, &bids, &CommitmentPlan::all_on(&case)) {
            Ok(s) => s,
            Err(MarketError::Infeasible { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for t in case.horizon.periods() {
            let heat_in: f64 = seq.heat.dispatch.values().map(|q| q[t]).sum();
            let heat_load: f64 = case.heat.load.values().map(|q| q[t]).sum();
            prop_assert!((heat_in - seq.heat.losses[t] - heat_load).abs() <= 1e-7 * heat_load.max(1.0));
            let gen: f64 = seq.electricity.dispatch.values().map(|q| q[t]).sum();
            let used: f64 = seq.electricity.consumption.values().map(|q| q[t]).sum();
            let load: f64 = case.power.load.values().map(|q| q[t]).sum();
            prop_assert!((gen - used - load).abs() <= 1e-7 * load.max(1.0));
            let wind: f64 = case.wind.iter().map(|w| seq.electricity.dispatch[&w.id][t]).sum();
            prop_assert!((wind + seq.curtailment.period_curtailed(t) - seq.curtailment.period_available(t)).abs() <= 1e-7);
        }
    }
}

#[test]
fn all_off_with_zero_heat_load_costs_nothing_in_heat() {
    let ctx = ctx();
    let mut case = common::small();
    for v in case.heat.load.values_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    let bids = build_case_heat_bids(&case).unwrap();
    let seq = run_sequential(&ctx, &case, &bids, &CommitmentPlan::all_off(&case)).unwrap();
    assert_eq!(seq.heat.objective, 0.0);
    assert!(seq.heat.dispatch.values().flatten().all(|q| *q == 0.0));
}

#[test]
fn decoupled_large_case_has_chp_violations() {
    let ctx = ctx();
    let case = common::large();
    let bids = build_case_heat_bids(&case).unwrap();
    let d = solve_decoupled_uc(&ctx, &case, &bids, &MilpOptions::default()).unwrap();
    assert!(d.max_envelope_error <= 1e-8);
    let seq = run_sequential(&ctx, &case, &bids, &d.plan).unwrap();
    let rep = check_cost_recovery(&case, &seq, ctx.tol.validity);
    let chp = rep
        .invalid()
        .filter(|e| e.unit.0.starts_with("CHP"))
        .count();
    assert!(chp >= 1);
    for e in rep.invalid() {
        assert!(e.loss > 0.0);
        assert!(e.bid_price.unwrap() < e.marginal_cost);
    }
}
