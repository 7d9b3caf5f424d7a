//! The heat and electricity clearings as one LP whose right-hand sides (and,
//! in general, coefficients) depend on the commitment vector `z`, plus the
//! commitment polytope and bid-validity links.
//!
//! Rows read `sum_k (a_k + sum_z a1_kz z) x_k  {>=,<=,=}  b + sum_z g_z z`.
//! Every continuous column is either nonnegative or free; upper limits are
//! explicit rows so that they carry duals.

use std::collections::BTreeMap;

use crate::bidding::{BidLadder, MarginalHeatCostCurve};
use crate::market::{electricity_ranks, heat_tie_rank, max_electricity_blocks};
use crate::solver::{Model, Sense, VarId};
use crate::system::{BusId, Case, HeatNodeId, HeatUnit, UnitId};

use super::plan::{CommitmentPlan, UnitPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Heat,
    Electricity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZVar {
    pub name: String,
    /// Commitment cost coefficient.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XVar {
    pub name: String,
    pub part: Part,
    pub period: usize,
    pub free: bool,
    /// Finite upper limit implied by the rows; used for envelopes.
    pub upper_hint: f64,
    /// Price used in the clearing, tie-break included.
    pub cost: f64,
    /// Price without tie-break, for reported costs.
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    HeatBalance,
    ElectricityBalance,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub period: usize,
    pub part: Part,
    pub tag: RowTag,
    pub terms: Vec<(usize, f64)>,
    /// `(x, z, a1)`: coefficient `a1 * z` on column `x`.
    pub z_terms: Vec<(usize, usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// `(z, g)`: right-hand side gains `g * z`.
    pub z_rhs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A selected heat block must be priced at or above its unit's marginal heat
/// cost at the local electricity price.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityLink {
    pub unit: UnitId,
    pub block: usize,
    pub period: usize,
    pub z: usize,
    /// Electricity balance row whose dual is the local price.
    pub balance_row: usize,
    pub price: f64,
    pub curve: MarginalHeatCostCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactModel {
    pub units: Vec<UnitId>,
    pub periods: usize,
    pub z: Vec<ZVar>,
    pub x: Vec<XVar>,
    pub rows: Vec<LpRow>,
    pub uc_rows: Vec<UcRow>,
    pub validity: Vec<ValidityLink>,
    /// `on[j][t]`.
    pub on: Vec<Vec<usize>>,
    pub startup: Vec<Vec<usize>>,
    pub shutdown: Vec<Vec<usize>>,
    /// `select[j][t][b]`; block 0 shares the commitment variable.
    pub select: Vec<Vec<Vec<usize>>>,
    /// `dispatch[j][t][b]`: heat block column.
    pub dispatch: Vec<Vec<Vec<usize>>>,
    /// CHP electricity output column per CHP unit index and period.
    pub chp_power: BTreeMap<usize, Vec<usize>>,
    pub heat_balance: BTreeMap<(HeatNodeId, usize), usize>,
    pub elec_balance: BTreeMap<(BusId, usize), usize>,
    /// `(unit, period, column)` of every electricity offer block.
    pub elec_offers: Vec<(UnitId, usize, usize)>,
}

#[derive(Default)]
struct Builder {
    z: Vec<ZVar>,
    x: Vec<XVar>,
    rows: Vec<LpRow>,
    uc_rows: Vec<UcRow>,
}

impl Builder {
    fn z(&mut self, name: String, cost: f64) -> usize {
        self.z.push(ZVar { name, cost });
        self.z.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn x(
        &mut self,
        name: String,
        part: Part,
        period: usize,
        free: bool,
        upper_hint: f64,
        price: f64,
        cost: f64,
    ) -> usize {
        self.x.push(XVar {
            name,
            part,
            period,
            free,
            upper_hint,
            cost,
            price,
        });
        self.x.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &mut self,
        name: String,
        period: usize,
        part: Part,
        tag: RowTag,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        z_rhs: Vec<(usize, f64)>,
    ) -> usize {
        self.rows.push(LpRow {
            name,
            period,
            part,
            tag,
            terms,
            z_terms: vec![],
            sense,
            rhs,
            z_rhs,
        });
        self.rows.len() - 1
    }

    fn uc(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.uc_rows.push(UcRow {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

impl CompactModel {
    pub fn build(case: &Case, bids: &[BidLadder], tie: f64) -> CompactModel {
        let n = case.horizon.len;
        let units = case.heat_units();
        let width = bids.iter().map(BidLadder::num_blocks).max().unwrap_or(1);
        let mut bld = Builder::default();
        let sel_cost = case.settings.block_selection_cost;

        // Commitment variables and polytope.
        let mut on = Vec::new();
        let mut startup = Vec::new();
        let mut shutdown = Vec::new();
        let mut select = Vec::new();
        for (u, ladder) in units.iter().zip(bids) {
            let id = u.id();
            let uc = u.uc();
            let nb = ladder.num_blocks();
            let on_j: Vec<usize> = (0..n)
                .map(|t| bld.z(format!("u_{id}_{t}"), uc.no_load_cost + sel_cost))
                .collect();
            let v_j: Vec<usize> = (0..n)
                .map(|t| bld.z(format!("v_{id}_{t}"), uc.startup_cost))
                .collect();
            let w_j: Vec<usize> = (0..n).map(|t| bld.z(format!("w_{id}_{t}"), 0.0)).collect();
            let mut sel_j = Vec::new();
            for (t, &on) in on_j.iter().enumerate() {
                let mut s = vec![on];
                for b in 1..nb {
                    s.push(bld.z(format!("ub_{id}_{b}_{t}"), sel_cost));
                }
                sel_j.push(s);
            }
            let init = if uc.initial_on { 1.0 } else { 0.0 };
            for t in 0..n {
                // v - w - u_t + u_{t-1} = 0
                let mut terms = vec![(v_j[t], 1.0), (w_j[t], -1.0), (on_j[t], -1.0)];
                let rhs = if t == 0 {
                    -init
                } else {
                    terms.push((on_j[t - 1], 1.0));
                    0.0
                };
                bld.uc(format!("logic_{id}_{t}"), terms, Sense::Eq, rhs);
                bld.uc(
                    format!("onoff_{id}_{t}"),
                    vec![(v_j[t], 1.0), (w_j[t], 1.0)],
                    Sense::Le,
                    1.0,
                );
                let up = uc.min_up.max(1);
                if up > 1 {
                    let mut terms: Vec<(usize, f64)> = (t.saturating_sub(up - 1)..=t)
                        .map(|k| (v_j[k], 1.0))
                        .collect();
                    terms.push((on_j[t], -1.0));
                    bld.uc(format!("minup_{id}_{t}"), terms, Sense::Le, 0.0);
                }
                let down = uc.min_down.max(1);
                if down > 1 {
                    let mut terms: Vec<(usize, f64)> = (t.saturating_sub(down - 1)..=t)
                        .map(|k| (w_j[k], 1.0))
                        .collect();
                    terms.push((on_j[t], 1.0));
                    bld.uc(format!("mindown_{id}_{t}"), terms, Sense::Le, 1.0);
                }
                for b in 1..nb {
                    bld.uc(
                        format!("order_{id}_{b}_{t}"),
                        vec![(sel_j[t][b], 1.0), (sel_j[t][b - 1], -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
            }
            on.push(on_j);
            startup.push(v_j);
            shutdown.push(w_j);
            select.push(sel_j);
        }

        // Heat market.
        let mut heat_inj: BTreeMap<(HeatNodeId, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let mut dispatch = Vec::new();
        for (j, (u, ladder)) in units.iter().zip(bids).enumerate() {
            let mut d_j = Vec::new();
            for (t, sel_t) in select[j].iter().enumerate() {
                let mut d_t = Vec::new();
                for (b, blk) in ladder.blocks(t).iter().enumerate() {
                    let cost = blk.price + tie * heat_tie_rank(j, b, width);
                    let x = bld.x(
                        format!("s_{}_{b}_{t}", u.id()),
                        Part::Heat,
                        t,
                        false,
                        blk.quantity,
                        blk.price,
                        cost,
                    );
                    bld.row(
                        format!("cap_{}_{b}_{t}", u.id()),
                        t,
                        Part::Heat,
                        RowTag::Other,
                        vec![(x, 1.0)],
                        Sense::Le,
                        0.0,
                        vec![(sel_t[b], blk.quantity)],
                    );
                    heat_inj
                        .entry((u.node_heat().clone(), t))
                        .or_default()
                        .push((x, 1.0));
                    d_t.push(x);
                }
                d_j.push(d_t);
            }
            dispatch.push(d_j);
        }
        for pipe in &case.heat.pipes {
            for t in 0..n {
                let kept = 1.0 - pipe.loss;
                for (dir, from, to) in [("+", &pipe.from, &pipe.to), ("-", &pipe.to, &pipe.from)] {
                    let f = bld.x(
                        format!("f{dir}_{}_{t}", pipe.id),
                        Part::Heat,
                        t,
                        false,
                        pipe.capacity,
                        0.0,
                        0.0,
                    );
                    bld.row(
                        format!("pcap{dir}_{}_{t}", pipe.id),
                        t,
                        Part::Heat,
                        RowTag::Other,
                        vec![(f, 1.0)],
                        Sense::Le,
                        pipe.capacity,
                        vec![],
                    );
                    heat_inj
                        .entry((from.clone(), t))
                        .or_default()
                        .push((f, -1.0));
                    heat_inj.entry((to.clone(), t)).or_default().push((f, kept));
                }
            }
        }
        let mut heat_balance = BTreeMap::new();
        for t in 0..n {
            for node in &case.heat.nodes {
                let key = (node.clone(), t);
                let terms = heat_inj.remove(&key).unwrap_or_default();
                let r = bld.row(
                    format!("hbal_{node}_{t}"),
                    t,
                    Part::Heat,
                    RowTag::HeatBalance,
                    terms,
                    Sense::Eq,
                    case.heat.load_at(node, t),
                    vec![],
                );
                heat_balance.insert(key, r);
            }
        }

        // Electricity market.
        let ranks = electricity_ranks(case);
        let ewidth = max_electricity_blocks(case);
        let etie = |id: &UnitId, b: usize| tie * (ranks[id] * ewidth + b) as f64;
        let mut elec_inj: BTreeMap<(BusId, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let mut elec_offers = Vec::new();
        for t in 0..n {
            for g in &case.thermal {
                for (b, blk) in g.blocks.iter().enumerate() {
                    let x = bld.x(
                        format!("e_{}_{b}_{t}", g.id),
                        Part::Electricity,
                        t,
                        false,
                        blk.quantity,
                        blk.price,
                        blk.price + etie(&g.id, b),
                    );
                    bld.row(
                        format!("ecap_{}_{b}_{t}", g.id),
                        t,
                        Part::Electricity,
                        RowTag::Other,
                        vec![(x, 1.0)],
                        Sense::Le,
                        blk.quantity,
                        vec![],
                    );
                    elec_inj
                        .entry((g.bus.clone(), t))
                        .or_default()
                        .push((x, 1.0));
                    elec_offers.push((g.id.clone(), t, x));
                }
            }
            for w in &case.wind {
                let avail = w.available[t];
                let x = bld.x(
                    format!("e_{}_{t}", w.id),
                    Part::Electricity,
                    t,
                    false,
                    avail,
                    0.0,
                    etie(&w.id, 0),
                );
                bld.row(
                    format!("wcap_{}_{t}", w.id),
                    t,
                    Part::Electricity,
                    RowTag::Other,
                    vec![(x, 1.0)],
                    Sense::Le,
                    avail,
                    vec![],
                );
                elec_inj
                    .entry((w.bus.clone(), t))
                    .or_default()
                    .push((x, 1.0));
                elec_offers.push((w.id.clone(), t, x));
            }
        }
        let mut chp_power = BTreeMap::new();
        for (j, u) in units.iter().enumerate() {
            match u {
                HeatUnit::Chp(c) => {
                    let mut cols = Vec::new();
                    let p_max = c.f_max / c.rho_e;
                    let price = c.marginal_power_cost();
                    for t in 0..n {
                        let p = bld.x(
                            format!("p_{}_{t}", c.id),
                            Part::Electricity,
                            t,
                            false,
                            p_max,
                            price,
                            price + etie(&c.id, 0),
                        );
                        let q: Vec<(usize, f64)> =
                            dispatch[j][t].iter().map(|&x| (x, 1.0)).collect();
                        let mut ratio = vec![(p, 1.0)];
                        ratio.extend(q.iter().map(|&(x, _)| (x, -c.r)));
                        bld.row(
                            format!("ratio_{}_{t}", c.id),
                            t,
                            Part::Electricity,
                            RowTag::Other,
                            ratio,
                            Sense::Ge,
                            0.0,
                            vec![],
                        );
                        let mut fuel = vec![(p, c.rho_e)];
                        fuel.extend(q.iter().map(|&(x, _)| (x, c.rho_h)));
                        bld.row(
                            format!("fmin_{}_{t}", c.id),
                            t,
                            Part::Electricity,
                            RowTag::Other,
                            fuel.clone(),
                            Sense::Ge,
                            0.0,
                            vec![(on[j][t], c.f_min)],
                        );
                        bld.row(
                            format!("fmax_{}_{t}", c.id),
                            t,
                            Part::Electricity,
                            RowTag::Other,
                            fuel,
                            Sense::Le,
                            0.0,
                            vec![(on[j][t], c.f_max)],
                        );
                        elec_inj
                            .entry((c.node_power.clone(), t))
                            .or_default()
                            .push((p, 1.0));
                        elec_offers.push((c.id.clone(), t, p));
                        cols.push(p);
                    }
                    chp_power.insert(j, cols);
                }
                HeatUnit::HeatPump(h) => {
                    for (t, d_t) in dispatch[j].iter().enumerate() {
                        let e = elec_inj.entry((h.node_power.clone(), t)).or_default();
                        e.extend(d_t.iter().map(|&x| (x, -1.0 / h.cop)));
                    }
                }
                HeatUnit::HeatOnly(_) => {}
            }
        }
        let reference = &case.power.buses[0];
        for t in 0..n {
            let theta: BTreeMap<&BusId, usize> = case
                .power
                .buses
                .iter()
                .filter(|b| *b != reference)
                .map(|b| {
                    (
                        b,
                        bld.x(
                            format!("theta_{b}_{t}"),
                            Part::Electricity,
                            t,
                            true,
                            0.0,
                            0.0,
                            0.0,
                        ),
                    )
                })
                .collect();
            for line in &case.power.lines {
                let bl = case.power.susceptance(line);
                let mut expr = Vec::new();
                if let Some(&v) = theta.get(&line.from) {
                    expr.push((v, bl));
                }
                if let Some(&v) = theta.get(&line.to) {
                    expr.push((v, -bl));
                }
                bld.row(
                    format!("lcap+_{}_{t}", line.id),
                    t,
                    Part::Electricity,
                    RowTag::Other,
                    expr.clone(),
                    Sense::Le,
                    line.capacity,
                    vec![],
                );
                bld.row(
                    format!("lcap-_{}_{t}", line.id),
                    t,
                    Part::Electricity,
                    RowTag::Other,
                    expr.clone(),
                    Sense::Ge,
                    -line.capacity,
                    vec![],
                );
                for &(v, a) in &expr {
                    elec_inj
                        .entry((line.from.clone(), t))
                        .or_default()
                        .push((v, -a));
                    elec_inj
                        .entry((line.to.clone(), t))
                        .or_default()
                        .push((v, a));
                }
            }
        }
        let mut elec_balance = BTreeMap::new();
        for t in 0..n {
            for bus in &case.power.buses {
                let key = (bus.clone(), t);
                let terms = merge(elec_inj.remove(&key).unwrap_or_default());
                let r = bld.row(
                    format!("ebal_{bus}_{t}"),
                    t,
                    Part::Electricity,
                    RowTag::ElectricityBalance,
                    terms,
                    Sense::Eq,
                    case.power.load_at(bus, t),
                    vec![],
                );
                elec_balance.insert(key, r);
            }
        }

        let mut validity = Vec::new();
        for (j, (u, ladder)) in units.iter().zip(bids).enumerate() {
            let Some(bus) = u.node_power() else { continue };
            let curve = MarginalHeatCostCurve::for_unit(*u);
            for t in 0..n {
                for (b, blk) in ladder.blocks(t).iter().enumerate() {
                    validity.push(ValidityLink {
                        unit: u.id().clone(),
                        block: b,
                        period: t,
                        z: select[j][t][b],
                        balance_row: elec_balance[&(bus.clone(), t)],
                        price: blk.price,
                        curve: curve.clone(),
                    });
                }
            }
        }

        CompactModel {
            units: units.iter().map(|u| u.id().clone()).collect(),
            periods: n,
            z: bld.z,
            x: bld.x,
            rows: bld.rows,
            uc_rows: bld.uc_rows,
            validity,
            on,
            startup,
            shutdown,
            select,
            dispatch,
            chp_power,
            heat_balance,
            elec_balance,
            elec_offers,
        }
    }

    /// Index and coefficient consistency; empty when the model is well formed.
    pub fn dimension_errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (nx, nz) = (self.x.len(), self.z.len());
        for r in &self.rows {
            if r.terms.iter().any(|&(k, a)| k >= nx || !a.is_finite())
                || r.z_rhs.iter().any(|&(z, g)| z >= nz || !g.is_finite())
                || r.z_terms
                    .iter()
                    .any(|&(k, z, a)| k >= nx || z >= nz || !a.is_finite())
                || !r.rhs.is_finite()
            {
                out.push(format!(
                    "row {} references an unknown column or a non-finite value",
                    r.name
                ));
            }
            for &(k, _, _) in &r.z_terms {
                if self.x[k].free || !self.x[k].upper_hint.is_finite() {
                    out.push(format!(
                        "row {}: z-dependent coefficient on unbounded column",
                        r.name
                    ));
                }
            }
        }
        for r in &self.uc_rows {
            if r.terms.iter().any(|&(z, _)| z >= nz) {
                out.push(format!(
                    "commitment row {} references an unknown variable",
                    r.name
                ));
            }
        }
        for v in &self.validity {
            if v.z >= nz || v.balance_row >= self.rows.len() {
                out.push(format!(
                    "validity link {}/{}/{} out of range",
                    v.unit, v.block, v.period
                ));
            }
        }
        out
    }

    /// Commitment vector of `plan`.
    pub fn z_of_plan(&self, plan: &CommitmentPlan, case: &Case) -> Vec<f64> {
        let mut z = vec![0.0; self.z.len()];
        for (j, (u, p)) in case.heat_units().iter().zip(&plan.units).enumerate() {
            let starts = p.startups(u.uc().initial_on);
            let stops = p.shutdowns(u.uc().initial_on);
            for t in 0..self.periods {
                z[self.on[j][t]] = f64::from(u8::from(p.on[t]));
                z[self.startup[j][t]] = f64::from(u8::from(starts[t]));
                z[self.shutdown[j][t]] = f64::from(u8::from(stops[t]));
                for (b, &k) in self.select[j][t].iter().enumerate() {
                    z[k] = f64::from(u8::from(p.is_selected(t, b)));
                }
            }
        }
        z
    }

    pub fn plan_of_z(&self, z: &[f64], pipes: usize) -> CommitmentPlan {
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(j, id)| {
                let on: Vec<bool> = (0..self.periods).map(|t| z[self.on[j][t]] > 0.5).collect();
                let blocks = (0..self.periods)
                    .map(|t| {
                        if on[t] {
                            self.select[j][t]
                                .iter()
                                .take_while(|&&k| z[k] > 0.5)
                                .count()
                        } else {
                            0
                        }
                    })
                    .collect();
                UnitPlan {
                    unit: id.clone(),
                    on,
                    blocks,
                }
            })
            .collect();
        CommitmentPlan {
            units,
            pipe_delays: vec![0; pipes],
        }
    }

    /// Heat output per unit and period from column values.
    pub fn heat_dispatch(&self, x: &[f64]) -> BTreeMap<UnitId, Vec<f64>> {
        self.units
            .iter()
            .zip(&self.dispatch)
            .map(|(id, d)| {
                (
                    id.clone(),
                    d.iter()
                        .map(|cols| cols.iter().map(|&k| x[k]).sum())
                        .collect(),
                )
            })
            .collect()
    }

    /// Commitment cost of `z`.
    pub fn commitment_cost(&self, z: &[f64]) -> f64 {
        self.z.iter().zip(z).map(|(v, &zi)| v.cost * zi).sum()
    }

    /// Cost of `x` in one market at unperturbed prices.
    pub fn market_cost(&self, x: &[f64], part: Part) -> f64 {
        self.x
            .iter()
            .zip(x)
            .filter(|(v, _)| v.part == part)
            .map(|(v, &xi)| v.price * xi)
            .sum()
    }
}

pub(crate) fn merge(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => out.push((v, a)),
        }
    }
    out
}

/// Envelope variable `w = z * v` for binary `z` and `v` in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub w: VarId,
    pub z: VarId,
    pub v: VarId,
}

impl Envelope {
    /// |w - z v| at a point.
    pub fn error(&self, x: &[f64]) -> f64 {
        (x[self.w.0] - x[self.z.0] * x[self.v.0]).abs()
    }
}

/// Add `w` with the four McCormick inequalities of `z * v`; exact whenever
/// `z` is 0 or 1.
pub fn add_mccormick(m: &mut Model, name: &str, z: VarId, v: VarId, lo: f64, hi: f64) -> Envelope {
    let w = m.add_var(format!("w_{name}"), lo.min(0.0), hi.max(0.0), 0.0);
    m.add_row(
        format!("mc1_{name}"),
        vec![(w, 1.0), (z, -lo)],
        Sense::Ge,
        0.0,
    );
    m.add_row(
        format!("mc2_{name}"),
        vec![(w, 1.0), (z, -hi)],
        Sense::Le,
        0.0,
    );
    m.add_row(
        format!("mc3_{name}"),
        vec![(w, 1.0), (v, -1.0), (z, -hi)],
        Sense::Ge,
        -hi,
    );
    m.add_row(
        format!("mc4_{name}"),
        vec![(w, 1.0), (v, -1.0), (z, -lo)],
        Sense::Le,
        -lo,
    );
    Envelope { w, z, v }
}

/// `slope * lmp + big_m * u <= rhs`, i.e. `price >= slope * lmp + intercept
/// - big_m * (1 - u)` with the validity slack folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityRow {
    pub name: String,
    pub z: usize,
    pub balance_row: usize,
    pub slope: f64,
    pub big_m: f64,
    pub rhs: f64,
}

impl ValidityRow {
    /// Amount by which the row fails at price `lmp` and selection `u`.
    pub fn violation(&self, lmp: f64, u: f64) -> f64 {
        (self.slope * lmp + self.big_m * u - self.rhs).max(0.0)
    }
}

/// One row per selected-block candidate and affine piece of its unit's
/// marginal heat cost curve. `big_m` is the curve's maximum over
/// `[-lmp_bound, lmp_bound]`, so an unselected block never binds the price.
pub fn build_bid_validity(links: &[ValidityLink], lmp_bound: f64, tol: f64) -> Vec<ValidityRow> {
    let mut out = Vec::new();
    for v in links {
        let big_m = v.curve.max_over(-lmp_bound, lmp_bound).max(0.0);
        for (p, piece) in v.curve.pieces.iter().enumerate() {
            out.push(ValidityRow {
                name: format!("valid_{}_{}_{}_{p}", v.unit, v.block, v.period),
                z: v.z,
                balance_row: v.balance_row,
                slope: piece.slope(),
                big_m,
                rhs: v.price - piece.intercept + big_m + tol,
            });
        }
    }
    out
}

/// A compact model rendered as a solver model.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub model: Model,
    pub z: Vec<VarId>,
    pub x: Vec<VarId>,
    /// Row duals, aware formulation only.
    pub y: Vec<VarId>,
    pub y_bounds: Vec<(f64, f64)>,
    pub envelopes: Vec<Envelope>,
}

impl Formulation {
    pub fn values(&self, vars: &[VarId], sol: &[f64]) -> Vec<f64> {
        vars.iter().map(|v| sol[v.0]).collect()
    }

    pub fn max_envelope_error(&self, sol: &[f64]) -> f64 {
        self.envelopes
            .iter()
            .map(|e| e.error(sol))
            .fold(0.0, f64::max)
    }
}

/// Bounds on the merged LP duals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualBounds {
    /// |LMP| limit; balance duals are bounded by `(1 - gamma) * lmp`.
    pub lmp: f64,
    /// Limit on every other dual.
    pub other: f64,
}

impl DualBounds {
    pub fn for_case(case: &Case, bids: &[BidLadder]) -> Self {
        let lmp = case.max_electricity_price().max(1.0);
        let heat = bids
            .iter()
            .flat_map(|l| l.periods.iter().flatten().map(|b| b.price))
            .fold(0.0, f64::max);
        let top = lmp.max(heat);
        Self {
            lmp: 10.0 * lmp,
            other: 10.0 * top,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lmp: self.lmp * k,
            other: self.other * k,
        }
    }
}

impl CompactModel {
    fn add_commitment(&self, m: &mut Model, weight: f64) -> Vec<VarId> {
        let z: Vec<VarId> = self
            .z
            .iter()
            .map(|v| m.add_binary(v.name.clone(), weight * v.cost))
            .collect();
        for r in &self.uc_rows {
            m.add_row(
                r.name.clone(),
                r.terms.iter().map(|&(k, a)| (z[k], a)).collect(),
                r.sense,
                r.rhs,
            );
        }
        z
    }

    /// Primal rows `A(z) x - G z {sense} b`, envelopes for `z * x` terms.
    fn add_primal(
        &self,
        m: &mut Model,
        z: &[VarId],
        keep: impl Fn(&LpRow) -> bool,
        weight: impl Fn(Part) -> f64,
        envelopes: &mut Vec<Envelope>,
    ) -> Vec<Option<VarId>> {
        let used: Vec<bool> = {
            let mut u = vec![false; self.x.len()];
            for r in self.rows.iter().filter(|r| keep(r)) {
                r.terms.iter().for_each(|&(k, _)| u[k] = true);
                r.z_terms.iter().for_each(|&(k, _, _)| u[k] = true);
            }
            u
        };
        let x: Vec<Option<VarId>> = self
            .x
            .iter()
            .zip(&used)
            .map(|(v, &u)| {
                u.then(|| {
                    let lo = if v.free { f64::NEG_INFINITY } else { 0.0 };
                    m.add_var(v.name.clone(), lo, f64::INFINITY, weight(v.part) * v.cost)
                })
            })
            .collect();
        let mut zx: BTreeMap<(usize, usize), VarId> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| keep(r)) {
            let mut terms: Vec<(VarId, f64)> = r
                .terms
                .iter()
                .map(|&(k, a)| (x[k].expect("used"), a))
                .collect();
            for &(k, zi, a) in &r.z_terms {
                let w = *zx.entry((k, zi)).or_insert_with(|| {
                    let e = add_mccormick(
                        m,
                        &format!("{}_{}", self.x[k].name, self.z[zi].name),
                        z[zi],
                        x[k].expect("used"),
                        0.0,
                        self.x[k].upper_hint,
                    );
                    envelopes.push(e);
                    e.w
                });
                terms.push((w, a));
            }
            terms.extend(r.z_rhs.iter().map(|&(zi, g)| (z[zi], -g)));
            m.add_row(r.name.clone(), terms, r.sense, r.rhs);
        }
        x
    }

    /// Heat-only commitment problem: commitment cost plus heat market cost.
    pub fn decoupled_milp(&self) -> Formulation {
        let mut m = Model::new();
        let z = self.add_commitment(&mut m, 1.0);
        let mut envelopes = Vec::new();
        let x = self.add_primal(
            &mut m,
            &z,
            |r| r.part == Part::Heat,
            |_| 1.0,
            &mut envelopes,
        );
        Formulation {
            model: m,
            z,
            x: x.into_iter().flatten().collect(),
            y: vec![],
            y_bounds: vec![],
            envelopes,
        }
    }

    /// Single-level problem: commitment plus the merged heat/electricity LP
    /// kept optimal through dual feasibility and strong duality, with
    /// bid-validity rows on the recovered prices.
    pub fn aware_milp(&self, gamma: f64, bounds: DualBounds, validity_tol: f64) -> Formulation {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
        let weight = |p: Part| Self::market_weight(gamma, p);
        let mut m = Model::new();
        let z = self.add_commitment(&mut m, gamma);
        let mut envelopes = Vec::new();
        let x: Vec<VarId> = self
            .add_primal(&mut m, &z, |_| true, weight, &mut envelopes)
            .into_iter()
            .map(|v| v.expect("all columns used"))
            .collect();

        // Duals with sign from the row sense and an artificial magnitude bound.
        let mut y = Vec::with_capacity(self.rows.len());
        let mut y_bounds = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let mag = match r.tag {
                RowTag::ElectricityBalance => (1.0 - gamma) * bounds.lmp,
                _ => bounds.other,
            };
            let (lo, hi) = match r.sense {
                Sense::Ge => (0.0, mag),
                Sense::Le => (-mag, 0.0),
                Sense::Eq => (-mag, mag),
            };
            y.push(m.add_var(format!("y_{}", r.name), lo, hi, 0.0));
            y_bounds.push((lo, hi));
        }
        let mut zy: BTreeMap<(usize, usize), VarId> = BTreeMap::new();
        let mut zy_var = |m: &mut Model, envelopes: &mut Vec<Envelope>, i: usize, zi: usize| {
            *zy.entry((i, zi)).or_insert_with(|| {
                let (lo, hi) = y_bounds[i];
                let e = add_mccormick(
                    m,
                    &format!("{}_{}", self.rows[i].name, self.z[zi].name),
                    z[zi],
                    y[i],
                    lo,
                    hi,
                );
                envelopes.push(e);
                e.w
            })
        };

        // Dual feasibility, one row per column.
        let mut cols: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); self.x.len()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(k, a) in &r.terms {
                cols[k].push((y[i], a));
            }
            for &(k, zi, a) in &r.z_terms {
                let w = zy_var(&mut m, &mut envelopes, i, zi);
                cols[k].push((w, a));
            }
        }
        for (k, (v, terms)) in self.x.iter().zip(cols).enumerate() {
            let sense = if v.free { Sense::Eq } else { Sense::Le };
            let _ = k;
            m.add_row(
                format!("dual_{}", v.name),
                terms,
                sense,
                weight(v.part) * v.cost,
            );
        }

        // Strong duality: primal cost <= dual objective.
        let mut sd: Vec<(VarId, f64)> = self
            .x
            .iter()
            .zip(&x)
            .map(|(v, &xv)| (xv, weight(v.part) * v.cost))
            .collect();
        for (i, r) in self.rows.iter().enumerate() {
            if r.rhs != 0.0 {
                sd.push((y[i], -r.rhs));
            }
            for &(zi, g) in &r.z_rhs {
                let w = zy_var(&mut m, &mut envelopes, i, zi);
                sd.push((w, -g));
            }
        }
        m.add_row("strong_duality", sd, Sense::Le, 0.0);

        // Validity on the recovered price y / (1 - gamma).
        for v in build_bid_validity(&self.validity, bounds.lmp, validity_tol) {
            m.add_row(
                v.name.clone(),
                vec![
                    (y[v.balance_row], v.slope / (1.0 - gamma)),
                    (z[v.z], v.big_m),
                ],
                Sense::Le,
                v.rhs,
            );
        }

        Formulation {
            model: m,
            z,
            x,
            y,
            y_bounds,
            envelopes,
        }
    }

    /// Weight of each market's costs in the merged objective.
    pub fn market_weight(gamma: f64, part: Part) -> f64 {
        match part {
            Part::Heat => gamma,
            Part::Electricity => 1.0 - gamma,
        }
    }

    /// Merged LP of period `t` alone with `blocks[j]` leading blocks of unit
    /// `j` selected; its objective is the period's share of the aware
    /// objective without commitment cost.
    pub fn period_lp(&self, t: usize, gamma: f64, blocks: &[usize]) -> Model {
        let mut m = Model::new();
        let mut fixed = vec![0.0; self.z.len()];
        for (j, &k) in blocks.iter().enumerate() {
            for &zi in &self.select[j][t][..k] {
                fixed[zi] = 1.0;
            }
        }
        let z: Vec<VarId> = self
            .z
            .iter()
            .zip(&fixed)
            .map(|(v, &a)| m.add_var(v.name.clone(), a, a, 0.0))
            .collect();
        let mut envelopes = Vec::new();
        self.add_primal(
            &mut m,
            &z,
            |r| r.period == t,
            |p| Self::market_weight(gamma, p),
            &mut envelopes,
        );
        m
    }

    /// Objective terms of the columns of period `t`, weighted as in the
    /// merged objective.
    pub fn period_cost_terms(&self, t: usize, gamma: f64) -> Vec<(usize, f64)> {
        self.x
            .iter()
            .enumerate()
            .filter(|(_, v)| v.period == t && v.cost != 0.0)
            .map(|(k, v)| (k, Self::market_weight(gamma, v.part) * v.cost))
            .collect()
    }
}
