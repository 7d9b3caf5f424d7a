//! Case files, scenario runs and result tables.

mod case_file;
mod report;
mod scenario;

pub use case_file::{
    apply_profile, load_case, load_profile, parse_case, CaseError, SCHEMA_VERSION,
};
pub use report::{
    cost_breakdown, emit_comparison, write_comparison, write_json, write_tables, ComparisonReport,
    CostBreakdown, DispatchDelta, ModelRun, PeriodCosts, SystemCosts, UnitLoss,
};
pub use scenario::{
    exit, load_scenario_case, run_scenario, AwareSummary, ModelSelector, ScenarioConfig,
    ScenarioError, ScenarioOutput,
};
