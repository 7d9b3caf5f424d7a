//! One scenario run: load a case, solve the selected model, write tables.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bidding::{build_case_heat_bids, BiddingError};
use crate::market::{run_sequential, MarketError};
use crate::solver::{MilpOptions, SolverContext, SolverError};
use crate::system::Case;
use crate::uc::{
    enumerate_oracle, solve_aware, solve_decoupled_uc, AwareDiagnostics, AwareOptions,
    CommitmentPlan, Consistency, OracleMode, OracleResult, UcError,
};

use super::report::{
    emit_comparison, write_comparison, write_json, write_tables, ComparisonReport, ModelRun,
};
use super::{load_case, load_profile, CaseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSelector {
    /// Sequential clearing with every unit and block committed.
    Clear,
    Decoupled,
    Aware,
    Compare,
    Oracle,
}

impl ModelSelector {
    pub const ALL: [ModelSelector; 5] = [
        Self::Clear,
        Self::Decoupled,
        Self::Aware,
        Self::Compare,
        Self::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clear => "clear",
            Self::Decoupled => "decoupled",
            Self::Aware => "aware",
            Self::Compare => "compare",
            Self::Oracle => "oracle",
        }
    }
}

impl FromStr for ModelSelector {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ScenarioError::Config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub case: PathBuf,
    pub model: ModelSelector,
    pub gamma: f64,
    /// File replacing the case's foreseen prices.
    pub profile: Option<PathBuf>,
    pub milp: MilpOptions,
    /// See [`AwareOptions::lift_states`].
    pub lift_states: u64,
    /// Largest number of plans the oracle may enumerate.
    pub oracle_budget: u64,
    pub out: PathBuf,
}

impl ScenarioConfig {
    pub fn new(case: impl Into<PathBuf>, model: ModelSelector, out: impl Into<PathBuf>) -> Self {
        Self {
            case: case.into(),
            model,
            gamma: AwareOptions::default().gamma,
            profile: None,
            milp: MilpOptions::default(),
            lift_states: AwareOptions::default().lift_states,
            oracle_budget: 50_000_000,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ScenarioError::Config(format!(
                "gamma must lie strictly between 0 and 1, got {}",
                self.gamma
            )));
        }
        for p in std::iter::once(&self.case).chain(&self.profile) {
            if !p.is_file() {
                return Err(ScenarioError::Config(format!(
                    "no such file: {}",
                    p.display()
                )));
            }
        }
        if !(self.milp.rel_gap >= 0.0 && self.milp.abs_gap >= 0.0) {
            return Err(ScenarioError::Config("gaps must be non-negative".into()));
        }
        Ok(())
    }

    fn aware_options(&self) -> AwareOptions {
        AwareOptions {
            gamma: self.gamma,
            milp: self.milp,
            lift_states: self.lift_states,
            ..AwareOptions::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Uc(#[from] UcError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("{0}")]
    Mismatch(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad arguments, unreadable or invalid case, output not writable.
    pub const INPUT: i32 = 1;
    /// No commitment or dispatch satisfies the constraints.
    pub const INFEASIBLE: i32 = 2;
    /// Time limit or enumeration budget reached before optimality.
    pub const LIMIT: i32 = 3;
    /// Solver failure or a failed numerical check.
    pub const NUMERICAL: i32 = 4;
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_)
            | Self::Case(_)
            | Self::Bidding(_)
            | Self::Io { .. }
            | Self::Output(_)
            | Self::Mismatch(_) => exit::INPUT,
            Self::Market(e) | Self::Uc(UcError::Market(e)) => match e {
                MarketError::Infeasible { .. } | MarketError::Unbounded(_) => exit::INFEASIBLE,
                MarketError::Limit(_) => exit::LIMIT,
                MarketError::Plan(_) | MarketError::Bidding(_) => exit::INPUT,
                MarketError::Solver(e) => solver_code(e),
            },
            Self::Uc(e) => match e {
                UcError::Gamma(_) | UcError::Bidding(_) => exit::INPUT,
                UcError::Infeasible => exit::INFEASIBLE,
                UcError::Limit { .. } | UcError::Budget { .. } => exit::LIMIT,
                UcError::Solver(e) => solver_code(e),
                _ => exit::NUMERICAL,
            },
            Self::Solver(e) => solver_code(e),
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::INPUT => "input",
            exit::INFEASIBLE => "infeasible",
            exit::LIMIT => "limit",
            _ => "numerical",
        }
    }
}

fn solver_code(e: &SolverError) -> i32 {
    match e {
        SolverError::UnknownBackend(_) | SolverError::Config(_) => exit::INPUT,
        _ => exit::NUMERICAL,
    }
}

#[derive(Debug, Serialize)]
struct ErrorFile<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// Everything a scenario produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutput {
    pub model: ModelSelector,
    pub runs: Vec<ModelRun>,
    pub comparison: Option<ComparisonReport>,
    pub aware: Option<AwareSummary>,
    pub oracle: Option<OracleResult>,
}

impl ScenarioOutput {
    pub fn run(&self, model: &str) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.model == model)
    }
}

/// Checks recorded for an aware solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwareSummary {
    pub gamma: f64,
    pub objective: f64,
    pub diagnostics: AwareDiagnostics,
    pub consistency: Consistency,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    model: &'a str,
    objective: Option<f64>,
    gap: Option<f64>,
    overall_cost: f64,
    heat_cost: f64,
    electricity_cost: f64,
    curtailment_percent: f64,
    recovery_violations: usize,
}

#[derive(Serialize)]
struct ResultFile<'a> {
    case: &'a str,
    model: ModelSelector,
    runs: Vec<RunInfo<'a>>,
    aware: Option<&'a AwareSummary>,
    oracle: Option<&'a OracleResult>,
}

/// Run a scenario and write its tables to `cfg.out`. On failure an
/// `error.json` is written there instead, when the directory is usable.
pub fn run_scenario(
    ctx: &SolverContext,
    cfg: &ScenarioConfig,
) -> Result<ScenarioOutput, ScenarioError> {
    let result = cfg.validate().and_then(|_| {
        std::fs::create_dir_all(&cfg.out).map_err(|source| ScenarioError::Io {
            path: cfg.out.clone(),
            source,
        })?;
        let _ = std::fs::remove_file(cfg.out.join("error.json"));
        let case = load_scenario_case(cfg)?;
        let out = solve_scenario(ctx, cfg, &case)?;
        write_outputs(&cfg.out, &case, &out)?;
        Ok(out)
    });
    if let Err(e) = &result {
        if cfg.out.is_dir() {
            let file = ErrorFile {
                kind: e.kind(),
                exit_code: e.exit_code(),
                message: e.to_string(),
            };
            if let Err(w) = write_json(&cfg.out, "error.json", &file) {
                log::warn!("{w}");
            }
        }
    }
    result
}

pub fn load_scenario_case(cfg: &ScenarioConfig) -> Result<Case, ScenarioError> {
    let case = load_case(&cfg.case)?;
    Ok(match &cfg.profile {
        Some(p) => load_profile(&case, p)?,
        None => case,
    })
}

fn solve_scenario(
    ctx: &SolverContext,
    cfg: &ScenarioConfig,
    case: &Case,
) -> Result<ScenarioOutput, ScenarioError> {
    let bids = build_case_heat_bids(case)?;
    let vtol = ctx.tol.validity;
    let mut out = ScenarioOutput {
        model: cfg.model,
        runs: Vec::new(),
        comparison: None,
        aware: None,
        oracle: None,
    };
    let decoupled = |out: &mut ScenarioOutput| -> Result<(), ScenarioError> {
        log::info!("solving decoupled commitment");
        let d = solve_decoupled_uc(ctx, case, &bids, &cfg.milp)?;
        let seq = run_sequential(ctx, case, &bids, &d.plan)?;
        let mut run = ModelRun::new(case, "decoupled", seq, vtol);
        run.objective = Some(d.objective);
        run.gap = d.gap;
        out.runs.push(run);
        Ok(())
    };
    let aware = |out: &mut ScenarioOutput| -> Result<(), ScenarioError> {
        log::info!("solving electricity-aware commitment, gamma {}", cfg.gamma);
        let a = solve_aware(ctx, case, &bids, &cfg.aware_options())?;
        let mut run = ModelRun::new(case, "aware", a.sequential.clone(), vtol);
        run.objective = Some(a.objective);
        run.gap = a.gap;
        out.runs.push(run);
        out.aware = Some(AwareSummary {
            gamma: a.gamma,
            objective: a.objective,
            diagnostics: a.diagnostics,
            consistency: a.consistency,
        });
        Ok(())
    };
    match cfg.model {
        ModelSelector::Clear => {
            let seq = run_sequential(ctx, case, &bids, &CommitmentPlan::all_on(case))?;
            out.runs.push(ModelRun::new(case, "clear", seq, vtol));
        }
        ModelSelector::Decoupled => decoupled(&mut out)?,
        ModelSelector::Aware => aware(&mut out)?,
        ModelSelector::Compare => {
            decoupled(&mut out)?;
            aware(&mut out)?;
            out.comparison = Some(emit_comparison(&out.runs[0], &out.runs[1])?);
        }
        ModelSelector::Oracle => {
            log::info!("enumerating commitment plans");
            let o = enumerate_oracle(
                ctx,
                case,
                &bids,
                OracleMode::Aware { gamma: cfg.gamma },
                cfg.oracle_budget,
            )?;
            let seq = run_sequential(ctx, case, &bids, &o.plan)?;
            let mut run = ModelRun::new(case, "oracle", seq, vtol);
            run.objective = Some(o.objective);
            out.runs.push(run);
            out.oracle = Some(o);
        }
    }
    Ok(out)
}

fn write_outputs(dir: &Path, case: &Case, out: &ScenarioOutput) -> Result<(), ScenarioError> {
    write_tables(dir, case, &out.runs)?;
    if let Some(c) = &out.comparison {
        write_comparison(dir, c)?;
    }
    let info = ResultFile {
        case: &case.name,
        model: out.model,
        runs: out
            .runs
            .iter()
            .map(|r| RunInfo {
                model: &r.model,
                objective: r.objective,
                gap: r.gap,
                overall_cost: r.costs.overall,
                heat_cost: r.costs.heat,
                electricity_cost: r.costs.electricity,
                curtailment_percent: r.costs.curtailment_percent,
                recovery_violations: r.recovery.violations(),
            })
            .collect(),
        aware: out.aware.as_ref(),
        oracle: out.oracle.as_ref(),
    };
    write_json(dir, "result.json", &info)
}
