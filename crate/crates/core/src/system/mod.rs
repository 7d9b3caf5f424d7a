//! Physical and economic description of a coupled heat/electricity case.
//!
//! Units carry their own parameters; networks carry topology and hourly
//! loads. A [`Case`] is immutable once it has passed [`validate_case`] and can
//! be shared freely between solves.

mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use validate::{validate_case, Violation};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(
    /// Identifier of any generating or consuming unit.
    UnitId
);
id_type!(BusId);
id_type!(HeatNodeId);

/// Commitment parameters shared by every heat unit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcParams {
    /// $/h while committed.
    #[serde(default)]
    pub no_load_cost: f64,
    /// $ per start-up.
    #[serde(default)]
    pub startup_cost: f64,
    #[serde(default)]
    pub min_up: usize,
    #[serde(default)]
    pub min_down: usize,
    /// State before the first period; assumed to have been held long enough.
    #[serde(default)]
    pub initial_on: bool,
}

/// Extraction CHP whose (P, Q) output is limited by a heat-to-power ratio and
/// a fuel window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionChp {
    pub id: UnitId,
    pub node_power: BusId,
    pub node_heat: HeatNodeId,
    /// Minimum power-to-heat ratio: P >= r Q.
    pub r: f64,
    /// Fuel per MWh of electricity.
    pub rho_e: f64,
    /// Fuel per MWh of heat.
    pub rho_h: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// $ per fuel unit.
    pub fuel_cost: f64,
    #[serde(default)]
    pub uc: UcParams,
    /// Share of the maximum heat output offered in each heat block.
    pub block_shares: Vec<f64>,
}

impl ExtractionChp {
    /// Largest heat output compatible with the fuel cap and ratio.
    pub fn q_max(&self) -> f64 {
        self.f_max / (self.rho_h + self.r * self.rho_e)
    }

    /// Marginal electricity cost at fixed heat output.
    pub fn marginal_power_cost(&self) -> f64 {
        self.fuel_cost * self.rho_e
    }

    /// Whether (p, q) lies in the feasible operating region for the given state.
    pub fn for_contains(&self, p: f64, q: f64, on: bool) -> bool {
        const EPS: f64 = 1e-9;
        let u = if on { 1.0 } else { 0.0 };
        let fuel = self.rho_h * q + self.rho_e * p;
        p >= -EPS
            && q >= -EPS
            && p + EPS >= self.r * q
            && fuel + EPS >= u * self.f_min
            && fuel <= u * self.f_max + EPS
    }

    /// Electricity output bounds implied by a fixed heat output.
    pub fn power_range(&self, q: f64, on: bool) -> Option<(f64, f64)> {
        if !on {
            return (q.abs() <= 1e-9).then_some((0.0, 0.0));
        }
        let lo = (self.r * q).max((self.f_min - self.rho_h * q) / self.rho_e);
        let hi = (self.f_max - self.rho_h * q) / self.rho_e;
        (q >= -1e-9 && lo <= hi + 1e-9).then_some((lo.max(0.0), hi.max(lo.max(0.0))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPump {
    pub id: UnitId,
    pub node_power: BusId,
    pub node_heat: HeatNodeId,
    /// Heat out per unit of electricity in.
    pub cop: f64,
    pub q_max: f64,
    #[serde(default)]
    pub uc: UcParams,
    pub block_shares: Vec<f64>,
}

/// Boilers and incinerators: heat only, static marginal cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatOnlyUnit {
    pub id: UnitId,
    pub node_heat: HeatNodeId,
    pub q_max: f64,
    pub marginal_cost: f64,
    #[serde(default)]
    pub uc: UcParams,
    pub block_shares: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub price: f64,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalPlant {
    pub id: UnitId,
    pub bus: BusId,
    /// Same offer every period.
    pub blocks: Vec<Block>,
}

/// Zero-priced, freely curtailable production.
#[derive(Debug, Clone, PartialEq)]
pub struct WindFarm {
    pub id: UnitId,
    pub bus: BusId,
    /// MWh/h available per period.
    pub available: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from: BusId,
    pub to: BusId,
    /// Per-unit on the case's base power.
    pub reactance: f64,
    /// MW.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    pub buses: Vec<BusId>,
    pub lines: Vec<Line>,
    /// MW per period, keyed by bus; absent buses carry no load.
    pub load: BTreeMap<BusId, Vec<f64>>,
    pub base_mva: f64,
}

impl PowerNetwork {
    pub fn load_at(&self, bus: &BusId, t: usize) -> f64 {
        self.load.get(bus).map_or(0.0, |p| p[t])
    }

    /// MW per radian of angle difference.
    pub fn susceptance(&self, line: &Line) -> f64 {
        self.base_mva / line.reactance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipe {
    pub id: String,
    pub from: HeatNodeId,
    pub to: HeatNodeId,
    /// MWh-th/h in either direction.
    pub capacity: f64,
    /// Fraction of the injected flow lost in transit.
    #[serde(default)]
    pub loss: f64,
    /// Hours. Only zero is supported.
    #[serde(default)]
    pub delay: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatNetwork {
    pub nodes: Vec<HeatNodeId>,
    pub pipes: Vec<Pipe>,
    pub load: BTreeMap<HeatNodeId, Vec<f64>>,
}

impl HeatNetwork {
    pub fn load_at(&self, node: &HeatNodeId, t: usize) -> f64 {
        self.load.get(node).map_or(0.0, |p| p[t])
    }
}

/// Contiguous block of one-hour periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Horizon {
    /// Label of the first period (hour of day).
    pub first_hour: usize,
    pub len: usize,
}

impl Horizon {
    pub fn periods(&self) -> std::ops::Range<usize> {
        0..self.len
    }

    pub fn hour(&self, t: usize) -> usize {
        self.first_hour + t
    }
}

/// Borrowed view of one heat-market participant.
#[derive(Debug, Clone, Copy)]
pub enum HeatUnit<'a> {
    Chp(&'a ExtractionChp),
    HeatPump(&'a HeatPump),
    HeatOnly(&'a HeatOnlyUnit),
}

impl<'a> HeatUnit<'a> {
    pub fn id(&self) -> &'a UnitId {
        match self {
            HeatUnit::Chp(u) => &u.id,
            HeatUnit::HeatPump(u) => &u.id,
            HeatUnit::HeatOnly(u) => &u.id,
        }
    }

    pub fn node_heat(&self) -> &'a HeatNodeId {
        match self {
            HeatUnit::Chp(u) => &u.node_heat,
            HeatUnit::HeatPump(u) => &u.node_heat,
            HeatUnit::HeatOnly(u) => &u.node_heat,
        }
    }

    pub fn node_power(&self) -> Option<&'a BusId> {
        match self {
            HeatUnit::Chp(u) => Some(&u.node_power),
            HeatUnit::HeatPump(u) => Some(&u.node_power),
            HeatUnit::HeatOnly(_) => None,
        }
    }

    pub fn uc(&self) -> &'a UcParams {
        match self {
            HeatUnit::Chp(u) => &u.uc,
            HeatUnit::HeatPump(u) => &u.uc,
            HeatUnit::HeatOnly(u) => &u.uc,
        }
    }

    pub fn block_shares(&self) -> &'a [f64] {
        match self {
            HeatUnit::Chp(u) => &u.block_shares,
            HeatUnit::HeatPump(u) => &u.block_shares,
            HeatUnit::HeatOnly(u) => &u.block_shares,
        }
    }

    pub fn q_max(&self) -> f64 {
        match self {
            HeatUnit::Chp(u) => u.q_max(),
            HeatUnit::HeatPump(u) => u.q_max,
            HeatUnit::HeatOnly(u) => u.q_max,
        }
    }

    /// CHPs and heat pumps: units whose heat cost depends on electricity prices.
    pub fn is_coupled(&self) -> bool {
        !matches!(self, HeatUnit::HeatOnly(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HeatUnit::Chp(_) => "chp",
            HeatUnit::HeatPump(_) => "heat_pump",
            HeatUnit::HeatOnly(_) => "heat_only",
        }
    }
}

/// Foreseen electricity prices used to build heat bids, $/MWh per period.
pub type PriceProfiles = BTreeMap<UnitId, Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// $ charged for each selected heat block and hour; breaks ties between
    /// selecting an idle block and leaving it out.
    pub block_selection_cost: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            block_selection_cost: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub name: String,
    pub horizon: Horizon,
    pub settings: Settings,
    pub power: PowerNetwork,
    pub heat: HeatNetwork,
    pub chps: Vec<ExtractionChp>,
    pub heat_pumps: Vec<HeatPump>,
    pub heat_only: Vec<HeatOnlyUnit>,
    pub thermal: Vec<ThermalPlant>,
    pub wind: Vec<WindFarm>,
    pub foreseen_lmps: PriceProfiles,
}

impl Case {
    /// All heat-market participants sorted by id.
    pub fn heat_units(&self) -> Vec<HeatUnit<'_>> {
        let mut units: Vec<HeatUnit<'_>> = self
            .chps
            .iter()
            .map(HeatUnit::Chp)
            .chain(self.heat_pumps.iter().map(HeatUnit::HeatPump))
            .chain(self.heat_only.iter().map(HeatUnit::HeatOnly))
            .collect();
        units.sort_by(|a, b| a.id().cmp(b.id()));
        units
    }

    pub fn heat_unit(&self, id: &UnitId) -> Option<HeatUnit<'_>> {
        self.heat_units().into_iter().find(|u| u.id() == id)
    }

    pub fn thermal_sorted(&self) -> Vec<&ThermalPlant> {
        let mut v: Vec<_> = self.thermal.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn wind_sorted(&self) -> Vec<&WindFarm> {
        let mut v: Vec<_> = self.wind.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Highest electricity offer price in the case (thermal blocks and CHP
    /// marginal power costs).
    pub fn max_electricity_price(&self) -> f64 {
        let thermal = self
            .thermal
            .iter()
            .flat_map(|g| g.blocks.iter().map(|b| b.price));
        let chp = self.chps.iter().map(ExtractionChp::marginal_power_cost);
        thermal.chain(chp).fold(0.0, f64::max)
    }

    /// Restrict every time series to periods `range`; the oracle uses this to
    /// clear markets hour by hour.
    pub fn window(&self, range: std::ops::Range<usize>) -> Case {
        let cut = |v: &Vec<f64>| v[range.clone()].to_vec();
        let mut c = self.clone();
        c.horizon = Horizon {
            first_hour: self.horizon.hour(range.start),
            len: range.len(),
        };
        c.power.load = self
            .power
            .load
            .iter()
            .map(|(k, v)| (k.clone(), cut(v)))
            .collect();
        c.heat.load = self
            .heat
            .load
            .iter()
            .map(|(k, v)| (k.clone(), cut(v)))
            .collect();
        for w in &mut c.wind {
            w.available = cut(&w.available);
        }
        c.foreseen_lmps = self
            .foreseen_lmps
            .iter()
            .map(|(k, v)| (k.clone(), cut(v)))
            .collect();
        c
    }

    /// Heat nodes grouped into connected district heating networks, each
    /// sorted, networks ordered by their first node.
    pub fn heat_networks(&self) -> Vec<Vec<HeatNodeId>> {
        let mut parent: BTreeMap<&HeatNodeId, &HeatNodeId> =
            self.heat.nodes.iter().map(|n| (n, n)).collect();
        fn find<'a>(
            p: &BTreeMap<&'a HeatNodeId, &'a HeatNodeId>,
            mut n: &'a HeatNodeId,
        ) -> &'a HeatNodeId {
            while p[n] != n {
                n = p[n];
            }
            n
        }
        for pipe in &self.heat.pipes {
            if let (Some(_), Some(_)) = (parent.get(&pipe.from), parent.get(&pipe.to)) {
                let a = find(&parent, &pipe.from);
                let b = find(&parent, &pipe.to);
                if a != b {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent.insert(hi, lo);
                }
            }
        }
        let mut groups: BTreeMap<&HeatNodeId, Vec<HeatNodeId>> = BTreeMap::new();
        for n in &self.heat.nodes {
            groups.entry(find(&parent, n)).or_default().push(n.clone());
        }
        groups
            .into_values()
            .map(|mut g| {
                g.sort();
                g
            })
            .collect()
    }
}
