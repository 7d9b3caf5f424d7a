#![allow(dead_code)]

use std::fmt::Write;
use std::path::PathBuf;

use heatuc::bidding::MarginalHeatCostCurve;
use heatuc::io::{load_case, parse_case};
use heatuc::solver::{solve_lp, Model, Sense, SolverContext, Tolerances};
use heatuc::system::{Case, ExtractionChp, HeatUnit, UcParams};
use rand::rngs::StdRng;
use rand::Rng;

pub fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(format!("{name}.toml"))
}

pub fn small() -> Case {
    load_case(&case_path("small")).expect("small case")
}

pub fn large() -> Case {
    load_case(&case_path("large")).expect("large case")
}

pub fn ctx() -> SolverContext {
    SolverContext::from_env(Tolerances::default()).expect("solver backend")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Heat-allocated cost of a CHP at fixed heat output: fuel cost minus the
/// best electricity revenue at `lambda`, minimised by LP over the power
/// output the operating region allows.
pub fn heat_cost_lp(c: &ExtractionChp, lambda: f64, q: f64) -> f64 {
    let mut m = Model::new();
    let p = m.add_var("p", 0.0, f64::INFINITY, c.fuel_cost * c.rho_e - lambda);
    m.add_row("ratio", vec![(p, 1.0)], Sense::Ge, c.r * q);
    m.add_row(
        "fuel_min",
        vec![(p, c.rho_e)],
        Sense::Ge,
        c.f_min - c.rho_h * q,
    );
    m.add_row(
        "fuel_max",
        vec![(p, c.rho_e)],
        Sense::Le,
        c.f_max - c.rho_h * q,
    );
    let rep = solve_lp(&m).expect("lp");
    assert!(rep.is_optimal(), "{:?}", rep.status);
    rep.objective + c.fuel_cost * c.rho_h * q
}

pub fn random_chp(rng: &mut StdRng) -> ExtractionChp {
    let f_max = rng.gen_range(50.0..500.0);
    ExtractionChp {
        id: "CHP".into(),
        node_power: "b1".into(),
        node_heat: "h1".into(),
        r: rng.gen_range(0.2..1.2),
        rho_e: rng.gen_range(1.5..3.5),
        rho_h: rng.gen_range(0.1..0.6),
        f_min: rng.gen_range(0.0..0.4) * f_max,
        f_max,
        fuel_cost: rng.gen_range(2.0..40.0),
        uc: UcParams::default(),
        block_shares: vec![1.0],
    }
}

/// One sample of the finite-difference check: returns (curve value,
/// difference quotient). Q is drawn where the power-to-heat ratio bounds the
/// power output from below.
pub fn marginal_cost_sample(rng: &mut StdRng) -> (f64, f64) {
    let c = random_chp(rng);
    let lambda = rng.gen_range(0.0..3.0 * c.fuel_cost * c.rho_e);
    let q_lo = c.f_min / (c.rho_h + c.r * c.rho_e);
    let q_hi = c.q_max();
    let eps = 0.01 * (q_hi - q_lo);
    let q = rng.gen_range(q_lo..q_hi - eps);
    let fd = (heat_cost_lp(&c, lambda, q + eps) - heat_cost_lp(&c, lambda, q)) / eps;
    let curve = MarginalHeatCostCurve::for_unit(HeatUnit::Chp(&c));
    (curve.eval(lambda), fd)
}

/// A random feasible case: a connected grid with an expensive backstop unit
/// at every loaded bus, and heat nodes each backed by a heat-only boiler.
pub fn random_case_toml(rng: &mut StdRng, periods: usize) -> String {
    let nb = rng.gen_range(2..=5);
    let nh = rng.gen_range(1..=3);
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "schema_version = 1\nname = \"random\"").unwrap();
    let buses: Vec<String> = (1..=nb).map(|i| format!("\"b{i}\"")).collect();
    writeln!(w, "buses = [{}]", buses.join(", ")).unwrap();
    let nodes: Vec<String> = (1..=nh).map(|i| format!("\"h{i}\"")).collect();
    writeln!(w, "heat_nodes = [{}]", nodes.join(", ")).unwrap();
    writeln!(w, "[horizon]\nperiods = {periods}\n").unwrap();
    let mut line = 0;
    for i in 2..=nb {
        let j = rng.gen_range(1..i);
        line += 1;
        writeln!(
            w,
            "[[lines]]\nid = \"l{line}\"\nfrom = \"b{j}\"\nto = \"b{i}\"\nreactance = {:.3}\ncapacity = {:.1}\n",
            rng.gen_range(0.05..0.3),
            rng.gen_range(20.0..150.0)
        )
        .unwrap();
    }
    if nb >= 3 && rng.gen_bool(0.6) {
        line += 1;
        writeln!(
            w,
            "[[lines]]\nid = \"l{line}\"\nfrom = \"b1\"\nto = \"b{nb}\"\nreactance = {:.3}\ncapacity = {:.1}\n",
            rng.gen_range(0.05..0.3),
            rng.gen_range(20.0..150.0)
        )
        .unwrap();
    }
    for i in 2..=nh {
        let j = rng.gen_range(1..i);
        writeln!(
            w,
            "[[pipes]]\nid = \"p{i}\"\nfrom = \"h{j}\"\nto = \"h{i}\"\ncapacity = {:.1}\nloss = {:.3}\n",
            rng.gen_range(5.0..40.0),
            rng.gen_range(0.0..0.1)
        )
        .unwrap();
    }
    let mut coupled = Vec::new();
    for k in 0..rng.gen_range(0..=2) {
        let id = format!("CHP{k}");
        let f_max = rng.gen_range(30.0..80.0);
        writeln!(
            w,
            "[[units.chp]]\nid = \"{id}\"\nnode_power = \"b{}\"\nnode_heat = \"h{}\"\nr = {:.2}\nrho_e = {:.2}\nrho_h = {:.2}\nf_min = {:.1}\nf_max = {f_max:.1}\nfuel_cost = {:.1}\nblock_shares = [0.5, 0.5]\n",
            rng.gen_range(1..=nb),
            rng.gen_range(1..=nh),
            rng.gen_range(0.3..1.0),
            rng.gen_range(1.8..3.0),
            rng.gen_range(0.15..0.4),
            rng.gen_range(0.0..0.2) * f_max,
            rng.gen_range(4.0..15.0)
        )
        .unwrap();
        coupled.push(id);
    }
    for k in 0..rng.gen_range(0..=2) {
        let id = format!("HP{k}");
        writeln!(
            w,
            "[[units.heat_pump]]\nid = \"{id}\"\nnode_power = \"b{}\"\nnode_heat = \"h{}\"\ncop = {:.2}\nq_max = {:.1}\nblock_shares = [0.6, 0.4]\n",
            rng.gen_range(1..=nb),
            rng.gen_range(1..=nh),
            rng.gen_range(2.0..4.5),
            rng.gen_range(5.0..30.0)
        )
        .unwrap();
        coupled.push(id);
    }
    let heat_loads: Vec<Vec<f64>> = (0..nh)
        .map(|_| (0..periods).map(|_| rng.gen_range(0.0..40.0)).collect())
        .collect();
    for (i, load) in heat_loads.iter().enumerate() {
        let peak = load.iter().cloned().fold(0.0, f64::max);
        writeln!(
            w,
            "[[units.heat_only]]\nid = \"HO{i}\"\nnode_heat = \"h{}\"\nq_max = {:.1}\nmarginal_cost = {:.2}\nblock_shares = [0.5, 0.5]\n",
            i + 1,
            peak + 1.0,
            rng.gen_range(8.0..40.0)
        )
        .unwrap();
    }
    let elec_loads: Vec<Vec<f64>> = (0..nb)
        .map(|_| {
            (0..periods)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        rng.gen_range(40.0..120.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    for (i, load) in elec_loads.iter().enumerate() {
        let peak = load.iter().cloned().fold(0.0, f64::max);
        // covers the local load plus the largest heat-pump draw
        writeln!(
            w,
            "[[units.thermal]]\nid = \"B{i}\"\nbus = \"b{}\"\nblocks = [{{ price = {:.2}, quantity = {:.1} }}]\n",
            i + 1,
            rng.gen_range(80.0..150.0),
            peak + 40.0
        )
        .unwrap();
    }
    for k in 0..rng.gen_range(1..=3) {
        let blocks: Vec<String> = (0..rng.gen_range(1..=3))
            .map(|_| {
                format!(
                    "{{ price = {:.2}, quantity = {:.1} }}",
                    rng.gen_range(5.0..60.0),
                    rng.gen_range(10.0..80.0)
                )
            })
            .collect();
        writeln!(
            w,
            "[[units.thermal]]\nid = \"G{k}\"\nbus = \"b{}\"\nblocks = [{}]\n",
            rng.gen_range(1..=nb),
            blocks.join(", ")
        )
        .unwrap();
    }
    for k in 0..rng.gen_range(0..=2) {
        let avail: Vec<String> = (0..periods)
            .map(|_| format!("{:.1}", rng.gen_range(0.0..80.0)))
            .collect();
        writeln!(
            w,
            "[[wind]]\nid = \"W{k}\"\nbus = \"b{}\"\navailable = [{}]\n",
            rng.gen_range(1..=nb),
            avail.join(", ")
        )
        .unwrap();
    }
    for (i, load) in elec_loads.iter().enumerate() {
        let p: Vec<String> = load.iter().map(|x| format!("{x:.1}")).collect();
        writeln!(
            w,
            "[[loads.electricity]]\nbus = \"b{}\"\nprofile = [{}]\n",
            i + 1,
            p.join(", ")
        )
        .unwrap();
    }
    for (i, load) in heat_loads.iter().enumerate() {
        let p: Vec<String> = load.iter().map(|x| format!("{x:.1}")).collect();
        writeln!(
            w,
            "[[loads.heat]]\nnode = \"h{}\"\nprofile = [{}]\n",
            i + 1,
            p.join(", ")
        )
        .unwrap();
    }
    for id in coupled {
        let p: Vec<String> = (0..periods)
            .map(|_| format!("{:.2}", rng.gen_range(0.0..50.0)))
            .collect();
        writeln!(
            w,
            "[[foreseen_lmps]]\nunits = [\"{id}\"]\nprices = [{}]\n",
            p.join(", ")
        )
        .unwrap();
    }
    s
}

pub fn random_case(rng: &mut StdRng, periods: usize) -> Case {
    let text = random_case_toml(rng, periods);
    parse_case(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}
