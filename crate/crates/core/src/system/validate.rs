use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use super::{BusId, Case, HeatNodeId, UcParams};

/// One failed check, located by a dotted path into the case file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, ok: bool, path: impl FnOnce() -> String, msg: &str) {
        if !ok {
            self.out.push(Violation::new(path(), msg));
        }
    }

    fn finite(&mut self, v: f64, path: &str, field: &str) -> bool {
        let ok = v.is_finite();
        self.check(ok, || format!("{path}.{field}"), "must be a finite number");
        ok
    }

    fn profile(&mut self, values: &[f64], len: usize, path: &str, what: &str) {
        if values.len() != len {
            self.out.push(Violation::new(
                path,
                format!("{what} has {} values, horizon has {len}", values.len()),
            ));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            self.out.push(Violation::new(
                format!("{path}[{t}]"),
                format!("negative or non-finite {what}"),
            ));
        }
    }

    fn uc(&mut self, uc: &UcParams, path: &str) {
        self.check(
            uc.no_load_cost.is_finite() && uc.no_load_cost >= 0.0,
            || format!("{path}.no_load_cost"),
            "no-load cost must be nonnegative",
        );
        self.check(
            uc.startup_cost.is_finite() && uc.startup_cost >= 0.0,
            || format!("{path}.startup_cost"),
            "start-up cost must be nonnegative",
        );
    }

    fn shares(&mut self, shares: &[f64], path: &str) {
        if shares.is_empty() {
            self.out.push(Violation::new(
                format!("{path}.block_shares"),
                "empty block specification",
            ));
            return;
        }
        if shares.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            self.out.push(Violation::new(
                format!("{path}.block_shares"),
                "block shares must be positive",
            ));
        }
        let total: f64 = shares.iter().sum();
        self.check(
            total <= 1.0 + 1e-9,
            || format!("{path}.block_shares"),
            "block shares sum to more than 1",
        );
    }
}

fn connected(buses: &[BusId], edges: impl Iterator<Item = (usize, usize)>) -> bool {
    if buses.is_empty() {
        return true;
    }
    let mut adj = vec![vec![]; buses.len()];
    for (a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; buses.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Check every physical and economic invariant of `case`, returning all
/// violations (empty when the case is usable).
pub fn validate_case(case: &Case) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    let n = case.horizon.len;
    c.check(
        n > 0,
        || "horizon.periods".into(),
        "horizon must be nonempty",
    );
    c.check(
        case.power.base_mva.is_finite() && case.power.base_mva > 0.0,
        || "settings.base_mva".into(),
        "base power must be positive",
    );
    c.check(
        case.settings.block_selection_cost.is_finite() && case.settings.block_selection_cost >= 0.0,
        || "settings.block_selection_cost".into(),
        "block selection cost must be nonnegative",
    );

    // Networks.
    let mut bus_index: BTreeMap<&BusId, usize> = BTreeMap::new();
    for (i, b) in case.power.buses.iter().enumerate() {
        if bus_index.insert(b, i).is_some() {
            c.out.push(Violation::new(
                format!("buses[{i}]"),
                format!("duplicate bus id `{b}`"),
            ));
        }
    }
    let mut edges = Vec::new();
    let mut line_ids = BTreeSet::new();
    for (i, l) in case.power.lines.iter().enumerate() {
        let p = format!("lines[{i}]");
        c.check(
            line_ids.insert(&l.id),
            || format!("{p}.id"),
            "duplicate line id",
        );
        let from = bus_index.get(&l.from).copied();
        let to = bus_index.get(&l.to).copied();
        c.check(from.is_some(), || format!("{p}.from"), "unknown bus");
        c.check(to.is_some(), || format!("{p}.to"), "unknown bus");
        c.check(
            l.from != l.to,
            || format!("{p}.to"),
            "line connects a bus to itself",
        );
        c.check(
            l.reactance.is_finite() && l.reactance > 0.0,
            || format!("{p}.reactance"),
            "reactance must be positive",
        );
        c.check(
            l.capacity.is_finite() && l.capacity > 0.0,
            || format!("{p}.capacity"),
            "line capacity must be positive",
        );
        if let (Some(a), Some(b)) = (from, to) {
            edges.push((a, b));
        }
    }
    c.check(
        connected(&case.power.buses, edges.into_iter()),
        || "lines".into(),
        "power network is not connected",
    );
    for (bus, profile) in &case.power.load {
        let p = format!("loads.electricity[bus={bus}]");
        c.check(bus_index.contains_key(bus), || p.clone(), "unknown bus");
        c.profile(profile, n, &format!("{p}.profile"), "load");
    }

    let mut node_set: BTreeSet<&HeatNodeId> = BTreeSet::new();
    for (i, h) in case.heat.nodes.iter().enumerate() {
        if !node_set.insert(h) {
            c.out.push(Violation::new(
                format!("heat_nodes[{i}]"),
                format!("duplicate heat node id `{h}`"),
            ));
        }
    }
    let mut pipe_ids = BTreeSet::new();
    for (i, pipe) in case.heat.pipes.iter().enumerate() {
        let p = format!("pipes[{i}]");
        c.check(
            pipe_ids.insert(&pipe.id),
            || format!("{p}.id"),
            "duplicate pipe id",
        );
        c.check(
            node_set.contains(&pipe.from),
            || format!("{p}.from"),
            "unknown heat node",
        );
        c.check(
            node_set.contains(&pipe.to),
            || format!("{p}.to"),
            "unknown heat node",
        );
        c.check(
            pipe.from != pipe.to,
            || format!("{p}.to"),
            "pipe connects a node to itself",
        );
        c.check(
            pipe.capacity.is_finite() && pipe.capacity > 0.0,
            || format!("{p}.capacity"),
            "pipe capacity must be positive",
        );
        c.check(
            pipe.loss.is_finite() && (0.0..1.0).contains(&pipe.loss),
            || format!("{p}.loss"),
            "loss coefficient must lie in [0, 1)",
        );
        c.check(
            pipe.delay == 0,
            || format!("{p}.delay"),
            "only zero pipe delays are supported",
        );
    }
    for (node, profile) in &case.heat.load {
        let p = format!("loads.heat[node={node}]");
        c.check(node_set.contains(node), || p.clone(), "unknown heat node");
        c.profile(profile, n, &format!("{p}.profile"), "load");
    }

    // Units.
    let mut unit_ids = BTreeSet::new();
    let mut unique = |c: &mut Checker, id: &str, path: &str| {
        c.check(
            unit_ids.insert(id.to_string()),
            || format!("{path}.id"),
            "duplicate unit id",
        );
    };
    let bus_ok = |b: &BusId| bus_index.contains_key(b);

    for (i, u) in case.chps.iter().enumerate() {
        let p = format!("units.chp[{i}]");
        unique(&mut c, &u.id.0, &p);
        c.check(
            bus_ok(&u.node_power),
            || format!("{p}.node_power"),
            "unknown bus",
        );
        c.check(
            node_set.contains(&u.node_heat),
            || format!("{p}.node_heat"),
            "unknown heat node",
        );
        let all_finite = ["r", "rho_e", "rho_h", "f_min", "f_max", "fuel_cost"]
            .iter()
            .zip([u.r, u.rho_e, u.rho_h, u.f_min, u.f_max, u.fuel_cost])
            .fold(true, |acc, (f, v)| c.finite(v, &p, f) && acc);
        if all_finite {
            c.check(
                u.r >= 0.0,
                || format!("{p}.r"),
                "negative heat-to-power ratio",
            );
            c.check(
                u.f_min >= 0.0,
                || format!("{p}.f_min"),
                "negative minimum fuel",
            );
            c.check(
                u.f_min < u.f_max,
                || format!("{p}.f_max"),
                "empty fuel interval",
            );
            c.check(
                u.rho_e > 0.0,
                || format!("{p}.rho_e"),
                "electricity fuel rate must be positive",
            );
            c.check(
                u.rho_h > 0.0,
                || format!("{p}.rho_h"),
                "heat fuel rate must be positive",
            );
            c.check(
                u.fuel_cost >= 0.0,
                || format!("{p}.fuel_cost"),
                "negative fuel cost",
            );
            if u.rho_e > 0.0 && u.f_max > 0.0 {
                // Q = 0, P = f_max / rho_e burns exactly f_max.
                let p_top = u.f_max / u.rho_e;
                c.check(
                    u.for_contains(p_top, 0.0, true),
                    || p.to_string(),
                    "feasible operating region is empty",
                );
            }
        }
        c.uc(&u.uc, &p);
        c.shares(&u.block_shares, &p);
    }
    for (i, u) in case.heat_pumps.iter().enumerate() {
        let p = format!("units.heat_pump[{i}]");
        unique(&mut c, &u.id.0, &p);
        c.check(
            bus_ok(&u.node_power),
            || format!("{p}.node_power"),
            "unknown bus",
        );
        c.check(
            node_set.contains(&u.node_heat),
            || format!("{p}.node_heat"),
            "unknown heat node",
        );
        c.check(
            u.cop.is_finite() && u.cop > 1.0,
            || format!("{p}.cop"),
            "COP must exceed 1",
        );
        c.check(
            u.q_max.is_finite() && u.q_max > 0.0,
            || format!("{p}.q_max"),
            "q_max must be positive",
        );
        c.uc(&u.uc, &p);
        c.shares(&u.block_shares, &p);
    }
    for (i, u) in case.heat_only.iter().enumerate() {
        let p = format!("units.heat_only[{i}]");
        unique(&mut c, &u.id.0, &p);
        c.check(
            node_set.contains(&u.node_heat),
            || format!("{p}.node_heat"),
            "unknown heat node",
        );
        c.check(
            u.q_max.is_finite() && u.q_max > 0.0,
            || format!("{p}.q_max"),
            "q_max must be positive",
        );
        c.check(
            u.marginal_cost.is_finite() && u.marginal_cost >= 0.0,
            || format!("{p}.marginal_cost"),
            "negative marginal cost",
        );
        c.uc(&u.uc, &p);
        c.shares(&u.block_shares, &p);
    }
    for (i, g) in case.thermal.iter().enumerate() {
        let p = format!("units.thermal[{i}]");
        unique(&mut c, &g.id.0, &p);
        c.check(bus_ok(&g.bus), || format!("{p}.bus"), "unknown bus");
        for (b, blk) in g.blocks.iter().enumerate() {
            c.check(
                blk.price.is_finite() && blk.price >= 0.0,
                || format!("{p}.blocks[{b}].price"),
                "bid price must be nonnegative",
            );
            c.check(
                blk.quantity.is_finite() && blk.quantity >= 0.0,
                || format!("{p}.blocks[{b}].quantity"),
                "bid quantity must be nonnegative",
            );
        }
    }
    for (i, w) in case.wind.iter().enumerate() {
        let p = format!("units.wind[{i}]");
        unique(&mut c, &w.id.0, &p);
        c.check(bus_ok(&w.bus), || format!("{p}.bus"), "unknown bus");
        c.profile(
            &w.available,
            n,
            &format!("{p}.available"),
            "wind availability",
        );
    }

    // Foreseen prices drive bids of every electricity-coupled heat unit.
    let heat_units = case.heat_units();
    for u in heat_units.iter().filter(|u| u.is_coupled()) {
        match case.foreseen_lmps.get(u.id()) {
            None => c.out.push(Violation::new(
                "foreseen_lmps",
                format!("no foreseen electricity prices for unit `{}`", u.id()),
            )),
            Some(v) => c.profile(
                v,
                n,
                &format!("foreseen_lmps[unit={}]", u.id()),
                "foreseen price",
            ),
        }
    }
    for id in case.foreseen_lmps.keys() {
        let coupled = heat_units.iter().any(|u| u.id() == id && u.is_coupled());
        c.check(
            coupled,
            || format!("foreseen_lmps[unit={id}]"),
            "not a CHP or heat pump",
        );
    }

    c.out
}

#[cfg(test)]
mod tests {
    use super::super::tests::chp;
    use super::super::*;
    use super::*;

    pub(crate) fn tiny_case() -> Case {
        let buses: Vec<BusId> = vec!["b1".into(), "b2".into()];
        Case {
            name: "tiny".into(),
            horizon: Horizon {
                first_hour: 0,
                len: 2,
            },
            settings: Settings::default(),
            power: PowerNetwork {
                buses,
                lines: vec![Line {
                    id: "l1".into(),
                    from: "b1".into(),
                    to: "b2".into(),
                    reactance: 0.1,
                    capacity: 100.0,
                }],
                load: [("b2".into(), vec![50.0, 60.0])].into_iter().collect(),
                base_mva: 100.0,
            },
            heat: HeatNetwork {
                nodes: vec!["h1".into()],
                pipes: vec![],
                load: [("h1".into(), vec![10.0, 10.0])].into_iter().collect(),
            },
            chps: vec![chp()],
            heat_pumps: vec![],
            heat_only: vec![],
            thermal: vec![ThermalPlant {
                id: "G1".into(),
                bus: "b1".into(),
                blocks: vec![Block {
                    price: 20.0,
                    quantity: 200.0,
                }],
            }],
            wind: vec![],
            foreseen_lmps: [("CHP".into(), vec![0.0, 5.9])].into_iter().collect(),
        }
    }

    #[test]
    fn clean_case_has_no_violations() {
        let v = validate_case(&tiny_case());
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn negative_ratio() {
        let mut c = tiny_case();
        c.chps[0].r = -0.1;
        let v = validate_case(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "negative heat-to-power ratio");
        assert_eq!(v[0].path, "units.chp[0].r");
    }

    #[test]
    fn empty_fuel_interval() {
        let mut c = tiny_case();
        c.chps[0].f_min = c.chps[0].f_max;
        let v = validate_case(&c);
        assert!(
            v.iter().any(|x| x.message == "empty fuel interval"),
            "{v:?}"
        );
    }

    #[test]
    fn reports_all_violations() {
        let mut c = tiny_case();
        c.chps[0].r = -1.0;
        c.chps[0].node_heat = "nowhere".into();
        c.power.lines[0].capacity = 0.0;
        c.heat.load.insert("h1".into(), vec![1.0]);
        let v = validate_case(&c);
        let paths: Vec<_> = v.iter().map(|x| x.path.as_str()).collect();
        assert!(paths.contains(&"units.chp[0].r"));
        assert!(paths.contains(&"units.chp[0].node_heat"));
        assert!(paths.contains(&"lines[0].capacity"));
        assert!(paths.contains(&"loads.heat[node=h1].profile"));
    }

    #[test]
    fn disconnected_grid() {
        let mut c = tiny_case();
        c.power.buses.push("b3".into());
        let v = validate_case(&c);
        assert_eq!(
            v,
            vec![Violation::new("lines", "power network is not connected")]
        );
    }

    #[test]
    fn missing_foreseen_prices() {
        let mut c = tiny_case();
        c.foreseen_lmps.clear();
        let v = validate_case(&c);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("no foreseen electricity prices"));
    }

    #[test]
    fn nonzero_delay_rejected() {
        let mut c = tiny_case();
        c.heat.nodes.push("h2".into());
        c.heat.pipes.push(Pipe {
            id: "p".into(),
            from: "h1".into(),
            to: "h2".into(),
            capacity: 5.0,
            loss: 0.05,
            delay: 1,
        });
        let v = validate_case(&c);
        assert_eq!(
            v,
            vec![Violation::new(
                "pipes[0].delay",
                "only zero pipe delays are supported"
            )]
        );
    }

    #[test]
    fn validation_is_idempotent() {
        let c = tiny_case();
        assert_eq!(validate_case(&c), validate_case(&c));
    }
}
