mod common;

use std::fs;
use std::path::Path;

use heatuc::io::{
    emit_comparison, exit, load_case, load_profile, parse_case, run_scenario, CaseError,
    ModelSelector, ScenarioConfig, ScenarioError, SCHEMA_VERSION,
};
use heatuc::market::SequentialResult;
use heatuc::system::{validate_case, Case};

use common::{case_path, ctx};

fn small_text() -> String {
    fs::read_to_string(case_path("small")).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

/// Heat, electricity and commitment cost of period `t`, recomputed from the
/// plan, the accepted blocks and the CHP operating regions.
fn hand_costs(case: &Case, seq: &SequentialResult, t: usize) -> (f64, f64, f64) {
    let mut commitment = 0.0;
    for (u, p) in case.heat_units().iter().zip(&seq.plan.units) {
        let uc = u.uc();
        let prev = if t == 0 { uc.initial_on } else { p.on[t - 1] };
        if p.on[t] {
            commitment += uc.no_load_cost;
            if !prev {
                commitment += uc.startup_cost;
            }
        }
        commitment += case.settings.block_selection_cost * p.blocks[t] as f64;
    }
    let mut heat = commitment;
    for b in seq.heat.blocks.iter().filter(|b| b.period == t) {
        if !b.unit.0.starts_with("HP") {
            heat += b.price * b.accepted;
        }
    }
    let mut elec: f64 = seq
        .electricity
        .blocks
        .iter()
        .filter(|b| b.period == t)
        .map(|b| b.price * b.accepted)
        .sum();
    for c in &case.chps {
        let q = seq.heat.dispatch[&c.id][t];
        let on = seq.plan.units.iter().find(|u| u.unit == c.id).unwrap().on[t];
        if on {
            let p_min = (c.r * q).max((c.f_min - c.rho_h * q) / c.rho_e).max(0.0);
            elec += c.fuel_cost * c.rho_e * p_min;
        }
    }
    (heat, elec, commitment)
}

#[test]
fn bundled_cases_validate_clean() {
    for name in ["small", "large"] {
        let case = load_case(&case_path(name)).unwrap();
        assert!(validate_case(&case).is_empty(), "{name}");
        assert_eq!(validate_case(&case), validate_case(&case));
        assert_eq!(case.name, name);
    }
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_text().replace("name = \"small\"", "name = \"small\"\ncolour = \"red\"");
    let p = write(dir.path(), "bad.toml", &text);
    let err = load_case(&p).unwrap_err();
    assert!(
        matches!(err, CaseError::Parse(ref m) if m.contains("colour")),
        "{err}"
    );
}

#[test]
fn schema_version_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_text().replace(
        &format!("schema_version = {SCHEMA_VERSION}"),
        "schema_version = 99",
    );
    let p = write(dir.path(), "v99.toml", &text);
    assert!(matches!(load_case(&p), Err(CaseError::Version { found }) if found == "99"));
    let missing = small_text().replace(&format!("schema_version = {SCHEMA_VERSION}\n"), "");
    assert!(parse_case(&missing).is_err());
}

#[test]
fn structural_errors_are_collected() {
    let text = small_text()
        .replace(
            "to = \"b3\"\nreactance = 0.1",
            "to = \"b9\"\nreactance = 0.1",
        )
        .replace("cop = 3.0", "cop = -1.0");
    match parse_case(&text) {
        Err(CaseError::Invalid(v)) => assert!(v.len() >= 2, "{v:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_case(Path::new("/nonexistent/case.toml")).unwrap_err();
    assert!(matches!(err, CaseError::Io { .. }));
}

#[test]
fn profile_replaces_foreseen_prices() {
    let dir = tempfile::tempdir().unwrap();
    let case = common::small();
    let p = write(
        dir.path(),
        "flat.toml",
        &format!(
            "schema_version = {SCHEMA_VERSION}\n[[foreseen_lmps]]\nunits = [\"CHP1\", \"HP1\"]\nprices = [1.0, 2.0, 3.0, 4.0]\n"
        ),
    );
    let out = load_profile(&case, &p).unwrap();
    assert_ne!(out.foreseen_lmps, case.foreseen_lmps);
    let short = write(
        dir.path(),
        "short.toml",
        &format!("schema_version = {SCHEMA_VERSION}\n[[foreseen_lmps]]\nunits = [\"CHP1\"]\nprices = [1.0]\n"),
    );
    assert!(load_profile(&case, &short).is_err());
}

#[test]
fn config_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::new(case_path("small"), ModelSelector::Aware, dir.path());
    assert!(cfg.validate().is_ok());
    for g in [0.0, 1.0, -0.5, f64::NAN] {
        cfg.gamma = g;
        assert!(
            matches!(cfg.validate(), Err(ScenarioError::Config(_))),
            "{g}"
        );
    }
    cfg.gamma = 0.99;
    cfg.milp.rel_gap = -1.0;
    assert!(cfg.validate().is_err());
    cfg.milp.rel_gap = 1e-4;
    cfg.profile = Some(dir.path().join("nope.toml"));
    let err = cfg.validate().unwrap_err();
    assert_eq!(err.exit_code(), exit::INPUT);
}

#[test]
fn model_selector_parses_its_names() {
    for m in ModelSelector::ALL {
        assert_eq!(m.name().parse::<ModelSelector>().unwrap(), m);
    }
    assert!("Aware".parse::<ModelSelector>().is_err());
    assert!("".parse::<ModelSelector>().is_err());
}

#[test]
fn small_compare_writes_consistent_tables() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::new(case_path("small"), ModelSelector::Compare, dir.path());
    let out = run_scenario(&ctx, &cfg).unwrap();
    for f in [
        "summary.csv",
        "plan.csv",
        "dispatch.csv",
        "lmps.csv",
        "heat_prices.csv",
        "curtailment.csv",
        "validity.csv",
        "heat_stack.csv",
        "wind.csv",
        "comparison.csv",
        "recovery.csv",
        "dispatch_delta.csv",
        "result.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(!dir.path().join("error.json").exists());

    // per-period rows add up to the total row
    let rows = read_csv(&dir.path().join("summary.csv"));
    let f = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    for model in ["decoupled", "aware"] {
        let mine: Vec<_> = rows.iter().filter(|r| &r[0] == model).collect();
        assert_eq!(mine.len(), 5);
        let (periods, total) = mine.split_at(4);
        for r in periods {
            assert!((f(r, 4) + f(r, 5) - f(r, 6)).abs() <= 1e-9 * f(r, 6).abs().max(1.0));
        }
        for col in 3..=8 {
            let sum: f64 = periods.iter().map(|r| f(r, col)).sum();
            assert!(
                (sum - f(total[0], col)).abs() <= 1e-9 * sum.abs().max(1.0),
                "{model} col {col}"
            );
        }
    }

    // costs match an independent recomputation
    let case = common::small();
    for run in &out.runs {
        let mut totals = (0.0, 0.0);
        for t in case.horizon.periods() {
            let (heat, elec, commitment) = hand_costs(&case, &run.seq, t);
            let p = &run.costs.periods[t];
            assert!(
                (p.commitment - commitment).abs() <= 1e-9,
                "{} {t}",
                run.model
            );
            assert!(
                (p.heat - heat).abs() <= 1e-9 * heat.max(1.0),
                "{} {t}",
                run.model
            );
            assert!(
                (p.electricity - elec).abs() <= 1e-9 * elec.max(1.0),
                "{} {t}",
                run.model
            );
            totals.0 += heat;
            totals.1 += elec;
        }
        assert!((run.costs.overall - totals.0 - totals.1).abs() <= 1e-8 * run.costs.overall);
    }
    let cmp = out.comparison.as_ref().unwrap();
    let d = out.run("decoupled").unwrap();
    let a = out.run("aware").unwrap();
    let delta = cmp.deltas();
    assert!((delta.overall - (a.costs.overall - d.costs.overall) / 1e3).abs() <= 1e-12);
    assert!((delta.heat - (a.costs.heat - d.costs.heat) / 1e3).abs() <= 1e-12);
    assert_eq!(a.recovery.violations(), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["model"], "compare");
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn comparison_of_a_run_with_itself_is_flat() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::new(case_path("small"), ModelSelector::Clear, dir.path());
    let out = run_scenario(&ctx, &cfg).unwrap();
    let run = &out.runs[0];
    let rep = emit_comparison(run, run).unwrap();
    let d = rep.deltas();
    assert_eq!(
        (d.overall, d.heat, d.electricity, d.curtailment_percent),
        (0.0, 0.0, 0.0, 0.0)
    );
    assert!(rep.dispatch.iter().all(|x| x.delta == 0.0));
    assert!(rep.recovery.iter().all(|l| l.decoupled == l.aware));
}

#[test]
fn comparison_rejects_runs_on_different_cases() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let small = run_scenario(
        &ctx,
        &ScenarioConfig::new(
            case_path("small"),
            ModelSelector::Clear,
            dir.path().join("s"),
        ),
    )
    .unwrap();
    let mut other = small.runs[0].clone();
    other.case_name = "other".into();
    let err = emit_comparison(&small.runs[0], &other).unwrap_err();
    assert!(matches!(err, ScenarioError::Mismatch(_)));
    assert_eq!(err.exit_code(), exit::INPUT);
}

#[test]
fn infeasible_case_exits_two_and_writes_error_file() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let text = small_text().replace(
        "profile = [16.0, 20.0, 24.0, 28.0]",
        "profile = [16.0, 20.0, 240.0, 28.0]",
    );
    let case = write(dir.path(), "short.toml", &text);
    let out = dir.path().join("out");
    let cfg = ScenarioConfig::new(&case, ModelSelector::Clear, &out);
    let err = run_scenario(&ctx, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::INFEASIBLE, "{err}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "infeasible");
    assert_eq!(json["exit_code"], 2);

    // a later good run clears the stale error file
    let cfg = ScenarioConfig::new(case_path("small"), ModelSelector::Clear, &out);
    run_scenario(&ctx, &cfg).unwrap();
    assert!(!out.join("error.json").exists());
}

#[test]
fn oracle_budget_exhaustion_exits_three() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::new(case_path("small"), ModelSelector::Oracle, dir.path());
    cfg.oracle_budget = 1;
    let err = run_scenario(&ctx, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::LIMIT);
    assert_eq!(err.kind(), "limit");
}

#[test]
fn bad_case_exits_one() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let case = write(dir.path(), "junk.toml", "this is not toml [");
    let cfg = ScenarioConfig::new(&case, ModelSelector::Aware, dir.path().join("out"));
    let err = run_scenario(&ctx, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::INPUT);
    assert!(dir.path().join("out/error.json").is_file());
}

#[test]
fn small_compare_is_deterministic() {
    let ctx = ctx();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_scenario(
        &ctx,
        &ScenarioConfig::new(case_path("small"), ModelSelector::Compare, &a),
    )
    .unwrap();
    run_scenario(
        &ctx,
        &ScenarioConfig::new(case_path("small"), ModelSelector::Compare, &b),
    )
    .unwrap();
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
}
