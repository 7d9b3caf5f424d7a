//! TOML case files.
//!
//! ```toml
//! schema_version = 1
//! name = "demo"
//!
//! [horizon]
//! first_hour = 0          # label of the first period
//! periods = 24
//!
//! [settings]
//! base_mva = 100.0
//! block_selection_cost = 0.01
//!
//! [shapes]                # optional named hourly shapes, scaled by `peak`/`capacity`
//! evening = [0.6, 0.7, ...]
//!
//! buses = ["b1", "b2"]
//! heat_nodes = ["h1"]
//!
//! [[lines]]
//! id = "l1"; from = "b1"; to = "b2"; reactance = 0.1; capacity = 100.0
//!
//! [[pipes]]
//! id = "p1"; from = "h1"; to = "h2"; capacity = 40.0; loss = 0.05
//!
//! [[units.chp]]           # also units.heat_pump, units.heat_only, units.thermal
//! id = "CHP1"; node_power = "b1"; node_heat = "h1"; r = 0.5; ...
//! uc = { no_load_cost = 20.0, startup_cost = 50.0, min_up = 2 }
//! block_shares = [0.5, 0.5]
//!
//! [[wind]]
//! id = "W1"; bus = "b2"; available = [...]     # or capacity = 200.0, shape = "evening"
//!
//! [[loads.electricity]]   # also loads.heat with `node`
//! bus = "b2"; profile = [...]                 # or peak = 80.0, shape = "evening"
//!
//! [[foreseen_lmps]]
//! units = ["CHP1"]; prices = [...]            # or day = 5.9, night = 0.0, day_hours = [7, 20]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::system::{
    validate_case, BusId, Case, ExtractionChp, HeatNetwork, HeatNodeId, HeatOnlyUnit, HeatPump,
    Horizon, Line, Pipe, PowerNetwork, PriceProfiles, Settings, ThermalPlant, UnitId, Violation,
    WindFarm,
};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { found: String },
    #[error("case has {} violation(s):\n{}", .0.len(), .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    schema_version: i64,
    #[serde(default)]
    name: String,
    horizon: HorizonFile,
    #[serde(default)]
    settings: SettingsFile,
    #[serde(default)]
    shapes: BTreeMap<String, Vec<f64>>,
    buses: Vec<BusId>,
    #[serde(default)]
    lines: Vec<Line>,
    #[serde(default)]
    heat_nodes: Vec<HeatNodeId>,
    #[serde(default)]
    pipes: Vec<Pipe>,
    #[serde(default)]
    units: UnitsFile,
    #[serde(default)]
    wind: Vec<WindFile>,
    #[serde(default)]
    loads: LoadsFile,
    #[serde(default)]
    foreseen_lmps: Vec<ForeseenFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonFile {
    #[serde(default)]
    first_hour: usize,
    periods: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    #[serde(default = "default_base")]
    base_mva: f64,
    #[serde(default)]
    block_selection_cost: f64,
}

fn default_base() -> f64 {
    100.0
}

impl Default for SettingsFile {
    fn default() -> Self {
        Self {
            base_mva: default_base(),
            block_selection_cost: 0.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitsFile {
    #[serde(default)]
    chp: Vec<ExtractionChp>,
    #[serde(default)]
    heat_pump: Vec<HeatPump>,
    #[serde(default)]
    heat_only: Vec<HeatOnlyUnit>,
    #[serde(default)]
    thermal: Vec<ThermalPlant>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindFile {
    id: UnitId,
    bus: BusId,
    available: Option<Vec<f64>>,
    capacity: Option<f64>,
    shape: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectricLoadFile {
    bus: BusId,
    profile: Option<Vec<f64>>,
    peak: Option<f64>,
    shape: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatLoadFile {
    node: HeatNodeId,
    profile: Option<Vec<f64>>,
    peak: Option<f64>,
    shape: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadsFile {
    #[serde(default)]
    electricity: Vec<ElectricLoadFile>,
    #[serde(default)]
    heat: Vec<HeatLoadFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForeseenFile {
    units: Vec<UnitId>,
    prices: Option<Vec<f64>>,
    day: Option<f64>,
    night: Option<f64>,
    /// First and last hour (inclusive) priced at `day`.
    day_hours: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    schema_version: Option<i64>,
    foreseen_lmps: Vec<ForeseenFile>,
}

fn resolve_series(
    explicit: Option<&Vec<f64>>,
    scale: Option<f64>,
    shape: Option<&String>,
    shapes: &BTreeMap<String, Vec<f64>>,
    path: &str,
    out: &mut Vec<Violation>,
) -> Vec<f64> {
    match (explicit, scale, shape) {
        (Some(v), None, None) => v.clone(),
        (None, Some(k), Some(name)) => match shapes.get(name) {
            Some(s) => s.iter().map(|x| k * x).collect(),
            None => {
                out.push(Violation::new(
                    format!("{path}.shape"),
                    format!("unknown shape `{name}`"),
                ));
                vec![]
            }
        },
        _ => {
            out.push(Violation::new(
                path,
                "give either an explicit series or a scale together with a shape",
            ));
            vec![]
        }
    }
}

fn resolve_foreseen(
    entries: &[ForeseenFile],
    horizon: &Horizon,
    section: &str,
    out: &mut Vec<Violation>,
) -> PriceProfiles {
    let mut profiles = PriceProfiles::new();
    for (i, e) in entries.iter().enumerate() {
        let path = format!("{section}[{i}]");
        let series = match (&e.prices, e.day, e.night, e.day_hours) {
            (Some(p), None, None, None) => p.clone(),
            (None, Some(day), Some(night), Some([lo, hi])) => horizon
                .periods()
                .map(|t| {
                    let h = horizon.hour(t) % 24;
                    if (lo..=hi).contains(&h) {
                        day
                    } else {
                        night
                    }
                })
                .collect(),
            _ => {
                out.push(Violation::new(
                    &path,
                    "give either `prices` or all of `day`, `night`, `day_hours`",
                ));
                continue;
            }
        };
        for u in &e.units {
            if profiles.insert(u.clone(), series.clone()).is_some() {
                out.push(Violation::new(
                    format!("{path}.units"),
                    format!("unit `{u}` has several foreseen price profiles"),
                ));
            }
        }
    }
    profiles
}

fn parse_versioned<T: for<'de> Deserialize<'de>>(
    text: &str,
    required: bool,
) -> Result<T, CaseError> {
    let value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CaseError::Parse(e.to_string()))?;
    match value.get("schema_version") {
        Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION => {}
        Some(other) => {
            return Err(CaseError::Version {
                found: other.to_string(),
            })
        }
        None if required => {
            return Err(CaseError::Version {
                found: "none".into(),
            })
        }
        None => {}
    }
    toml::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))
}

/// Parse and validate a case from TOML text.
pub fn parse_case(text: &str) -> Result<Case, CaseError> {
    let file: CaseFile = parse_versioned(text, true)?;
    debug_assert_eq!(file.schema_version, SCHEMA_VERSION);
    let mut violations = Vec::new();
    let horizon = Horizon {
        first_hour: file.horizon.first_hour,
        len: file.horizon.periods,
    };

    let mut power_load: BTreeMap<BusId, Vec<f64>> = BTreeMap::new();
    for (i, l) in file.loads.electricity.iter().enumerate() {
        let path = format!("loads.electricity[{i}]");
        let v = resolve_series(
            l.profile.as_ref(),
            l.peak,
            l.shape.as_ref(),
            &file.shapes,
            &path,
            &mut violations,
        );
        if power_load.insert(l.bus.clone(), v).is_some() {
            violations.push(Violation::new(format!("{path}.bus"), "bus listed twice"));
        }
    }
    let mut heat_load: BTreeMap<HeatNodeId, Vec<f64>> = BTreeMap::new();
    for (i, l) in file.loads.heat.iter().enumerate() {
        let path = format!("loads.heat[{i}]");
        let v = resolve_series(
            l.profile.as_ref(),
            l.peak,
            l.shape.as_ref(),
            &file.shapes,
            &path,
            &mut violations,
        );
        if heat_load.insert(l.node.clone(), v).is_some() {
            violations.push(Violation::new(
                format!("{path}.node"),
                "heat node listed twice",
            ));
        }
    }
    let wind = file
        .wind
        .iter()
        .enumerate()
        .map(|(i, w)| WindFarm {
            id: w.id.clone(),
            bus: w.bus.clone(),
            available: resolve_series(
                w.available.as_ref(),
                w.capacity,
                w.shape.as_ref(),
                &file.shapes,
                &format!("wind[{i}]"),
                &mut violations,
            ),
        })
        .collect();
    let foreseen_lmps = resolve_foreseen(
        &file.foreseen_lmps,
        &horizon,
        "foreseen_lmps",
        &mut violations,
    );

    let case = Case {
        name: file.name,
        horizon,
        settings: Settings {
            block_selection_cost: file.settings.block_selection_cost,
        },
        power: PowerNetwork {
            buses: file.buses,
            lines: file.lines,
            load: power_load,
            base_mva: file.settings.base_mva,
        },
        heat: HeatNetwork {
            nodes: file.heat_nodes,
            pipes: file.pipes,
            load: heat_load,
        },
        chps: file.units.chp,
        heat_pumps: file.units.heat_pump,
        heat_only: file.units.heat_only,
        thermal: file.units.thermal,
        wind,
        foreseen_lmps,
    };
    violations.extend(validate_case(&case));
    if violations.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Invalid(violations))
    }
}

pub fn load_case(path: &Path) -> Result<Case, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_case(&text)
}

/// Replace the foreseen prices of `case` with those of a profile file.
pub fn apply_profile(case: &Case, text: &str) -> Result<Case, CaseError> {
    let file: ProfileFile = parse_versioned(text, false)?;
    let _ = file.schema_version;
    let mut violations = Vec::new();
    let profiles = resolve_foreseen(
        &file.foreseen_lmps,
        &case.horizon,
        "foreseen_lmps",
        &mut violations,
    );
    let mut out = case.clone();
    out.foreseen_lmps = profiles;
    violations.extend(validate_case(&out));
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(CaseError::Invalid(violations))
    }
}

pub fn load_profile(case: &Case, path: &Path) -> Result<Case, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    apply_profile(case, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
schema_version = 1
name = "mini"
buses = ["b1"]
heat_nodes = ["h1"]

[horizon]
first_hour = 6
periods = 3

[shapes]
flat = [1.0, 1.0, 1.0]

[[units.chp]]
id = "C"
node_power = "b1"
node_heat = "h1"
r = 0.5
rho_e = 2.4
rho_h = 0.25
f_min = 10.0
f_max = 60.0
fuel_cost = 10.0
uc = { no_load_cost = 5.0, min_up = 2 }
block_shares = [0.5, 0.5]

[[units.thermal]]
id = "G"
bus = "b1"
blocks = [{ price = 20.0, quantity = 100.0 }]

[[wind]]
id = "W"
bus = "b1"
capacity = 30.0
shape = "flat"

[[loads.electricity]]
bus = "b1"
profile = [40.0, 50.0, 60.0]

[[loads.heat]]
node = "h1"
peak = 10.0
shape = "flat"

[[foreseen_lmps]]
units = ["C"]
day = 5.9
night = 0.0
day_hours = [7, 20]
"#;

    #[test]
    fn loads_mini_case() {
        let c = parse_case(MINI).unwrap();
        assert_eq!(c.horizon.len, 3);
        assert_eq!(c.foreseen_lmps[&"C".into()], vec![0.0, 5.9, 5.9]);
        assert_eq!(c.wind[0].available, vec![30.0; 3]);
        assert_eq!(c.heat.load[&"h1".into()], vec![10.0; 3]);
        assert_eq!(c.chps[0].uc.no_load_cost, 5.0);
        assert_eq!(c.chps[0].uc.min_up, 2);
        assert!(!c.chps[0].uc.initial_on);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = MINI.replace("fuel_cost = 10.0", "fuel_cost = 10.0\nfuel_price = 3.0");
        let err = parse_case(&text).unwrap_err().to_string();
        assert!(err.contains("fuel_price"), "{err}");
    }

    #[test]
    fn version_mismatch() {
        let text = MINI.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(parse_case(&text), Err(CaseError::Version { .. })));
        let text = MINI.replace("schema_version = 1", "");
        assert!(matches!(parse_case(&text), Err(CaseError::Version { .. })));
    }

    #[test]
    fn dangling_reference_has_path() {
        let text = MINI.replace("bus = \"b1\"\nprofile", "bus = \"b9\"\nprofile");
        match parse_case(&text) {
            Err(CaseError::Invalid(v)) => {
                assert!(
                    v.iter().any(|x| x.path == "loads.electricity[bus=b9]"),
                    "{v:?}"
                )
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_shape() {
        let text = MINI.replace(
            "shape = \"flat\"\n\n[[loads.electricity]]",
            "shape = \"gusty\"\n\n[[loads.electricity]]",
        );
        match parse_case(&text) {
            Err(CaseError::Invalid(v)) => assert!(v.iter().any(|x| x.path == "wind[0].shape")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn profile_file_overrides_prices() {
        let c = parse_case(MINI).unwrap();
        let p = apply_profile(
            &c,
            "[[foreseen_lmps]]\nunits = [\"C\"]\nprices = [1.0, 2.0, 3.0]\n",
        )
        .unwrap();
        assert_eq!(p.foreseen_lmps[&"C".into()], vec![1.0, 2.0, 3.0]);
        assert!(apply_profile(&c, "[[foreseen_lmps]]\nunits = [\"C\"]\nprices = [1.0]\n").is_err());
    }
}
